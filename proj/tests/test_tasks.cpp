#include <doctest.h>

#include <cmath>

#include "embedopt/sampler.hpp"
#include "embedopt/tasks.hpp"
#include "oracles.hpp"

using namespace embedopt;

TEST_CASE("seeded construction is reproducible") {
  for (TaskKind kind : {TaskKind::distance, TaskKind::map}) {
    ToyTaskSpec spec;
    spec.kind = kind;
    Rng a(5), b(5), c(6);
    const ToyTask ta = build_toy_task(spec, a), tb = build_toy_task(spec, b), tc = build_toy_task(spec, c);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(ta.model->modes()[k].mean_map.weights.data == tb.model->modes()[k].mean_map.weights.data);
      CHECK(ta.model->modes()[k].mean_map.offset == tb.model->modes()[k].mean_map.offset);
    }
    CHECK(ta.constraints == tb.constraints);
    CHECK(ta.target == tb.target);
    CHECK(ta.c_init == tb.c_init);
    CHECK_FALSE(ta.target == tc.target);
  }
}

TEST_CASE("toy task structure") {
  ToyTaskSpec spec;
  Rng rng(7);
  const ToyTask t = build_toy_task(spec, rng);
  CHECK(t.model->dim() == 24);
  CHECK(t.c_init.component("single").values.size() == 32);
  CHECK(t.c_init.component("pair").values.size() == 64);
  CHECK(t.model->modes().size() == 2);
  CHECK(t.model->modes()[0].weight == 0.9);
  CHECK(t.constraints.size() == 5);
  for (const auto& c : t.constraints) CHECK(c.delta == 2.0);
  // Mode means at c_init are the chain templates.
  const auto templates = toy_chain_templates(spec);
  const Vector m0 = t.model->modes()[0].mean_map.apply(t.c_init.flatten());
  CHECK(oracle::rel_err(m0, templates[0].coords) < 1e-12);
  // Consecutive beads sit one bond length apart in both templates.
  for (const auto& s : templates)
    for (std::size_t i = 0; i + 1 < spec.num_beads; ++i)
      CHECK(bead_distance(s.coords, i, i + 1) == doctest::Approx(spec.bond_length).epsilon(0.1));
  CHECK(t.metric_name() == "constraints_satisfied");
  CHECK(t.metric(t.target) == 5.0);
}

TEST_CASE("map task self-check") {
  ToyTaskSpec spec;
  spec.kind = TaskKind::map;
  Rng rng(8);
  const ToyTask t = build_toy_task(spec, rng);
  REQUIRE(t.target_map.has_value());
  CHECK(t.metric(t.target) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(t.reward->value(t.target)) < 1e-12);
  CHECK(t.metric_name() == "map_cc");
  CHECK(t.metric(t.prior_reference) < 0.99);
}

TEST_CASE("prior samples violate at least one constraint for most seeds") {
  ToyTaskSpec spec;
  const int n = 500;
  int ancestral = 0, diffusion = 0;
  const auto sched = build_power_schedule(100, 0.05, 40.0);
  SamplerOptions af3;
  af3.mode = SamplerMode::af3;
  for (int s = 0; s < n; ++s) {
    Rng task_rng(1000 + s);
    const ToyTask t = build_toy_task(spec, task_rng);
    Rng r(s);
    ancestral += t.metric(t.model->sample_prior(t.c_init, r)) < 5.0;
    Rng r2(s);
    diffusion += t.metric(sample_unguided(*t.model, t.c_init, sched, r2, af3).x0) < 5.0;
  }
  CHECK(ancestral >= 0.8 * n);
  CHECK(diffusion >= 0.8 * n);
}
