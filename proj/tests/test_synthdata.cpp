#include <algorithm>
#include <filesystem>
#include <set>

#include <doctest.h>

#include "dmtl/error.hpp"
#include "dmtl/synthdata.hpp"

using namespace dmtl;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.n_identities = 4;
  c.n_expressions = 3;
  c.dim = 6;
  c.samples_per_cell = 10;
  c.seed = 3;
  return c;
}

// Nearest class-mean accuracy on the test split, means fitted on train.
double nearest_centroid(const Dataset& d, bool identity) {
  const std::size_t k = identity ? d.config.n_identities : d.config.n_expressions;
  std::vector<Vector> mean(k, Vector(d.config.dim, 0.0));
  std::vector<double> count(k, 0.0);
  auto label = [&](const Sample& s) { return identity ? s.identity : s.expression; };
  for (std::size_t i : d.train) {
    const Sample& s = d.samples[i];
    for (std::size_t j = 0; j < d.config.dim; ++j) mean[label(s)][j] += s.x[j];
    count[label(s)] += 1;
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (double& v : mean[c]) v /= count[c];
  }
  double hits = 0;
  for (std::size_t i : d.test) {
    const Sample& s = d.samples[i];
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double dist = 0;
      for (std::size_t j = 0; j < d.config.dim; ++j) dist += (s.x[j] - mean[c][j]) * (s.x[j] - mean[c][j]);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    hits += static_cast<int>(best) == label(s) ? 1 : 0;
  }
  return hits / static_cast<double>(d.test.size());
}

}  // namespace

TEST_CASE("default dataset has 3600 samples split 22/4/4 per cell") {
  const Dataset d = generate(SynthConfig{});
  CHECK(d.samples.size() == 3600);
  CHECK(d.train.size() == 120 * 22);
  CHECK(d.val.size() == 120 * 4);
  CHECK(d.test.size() == 120 * 4);
}

TEST_CASE("splits are disjoint, contiguous and stratified") {
  const Dataset d = generate(small());
  std::set<std::size_t> seen;
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (std::size_t i : *split) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == d.samples.size());
  CHECK(d.train.front() == 0);
  CHECK(d.val.front() == d.train.size());
  std::set<std::pair<int, int>> cells;
  for (std::size_t i : d.train) cells.insert({d.samples[i].identity, d.samples[i].expression});
  CHECK(cells.size() == 12);
}

TEST_CASE("generation is deterministic per seed") {
  const Dataset a = generate(small());
  const Dataset b = generate(small());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].x == b.samples[i].x);
  SynthConfig other = small();
  other.seed = 4;
  CHECK(generate(other).samples[0].x != a.samples[0].x);
}

TEST_CASE("noiseless samples of one cell coincide") {
  SynthConfig c = small();
  c.noise = 0.0;
  const Dataset d = generate(c);
  for (const Sample& s : d.samples) {
    for (const Sample& t : d.samples) {
      if (s.identity == t.identity && s.expression == t.expression) CHECK(s.x == t.x);
    }
  }
}

TEST_CASE("labels are in range and the config is validated") {
  const Dataset d = generate(small());
  for (const Sample& s : d.samples) {
    CHECK(s.identity >= 0);
    CHECK(s.identity < 4);
    CHECK(s.expression < 3);
  }
  SynthConfig c = small();
  c.n_identities = 1;
  CHECK_THROWS_AS(generate(c), Error);
  c = small();
  c.samples_per_cell = 3;
  CHECK_THROWS_AS(generate(c), Error);
  c = small();
  c.identity_scale = 0.0;
  CHECK_THROWS_AS(generate(c), Error);
}

TEST_CASE("scale knobs set task difficulty") {
  SynthConfig c = small();
  c.identity_scale = 0.1;
  c.expression_scale = 2.0;
  c.noise = 0.5;
  const Dataset d = generate(c);
  CHECK(nearest_centroid(d, false) > nearest_centroid(d, true));
}

TEST_CASE("pairs are balanced, labelled correctly and deterministic") {
  SynthConfig c = small();
  c.n_identities = 2;
  c.n_expressions = 2;
  const Dataset d = generate(c);
  const PairSet p = sample_pairs(d, d.test, 4, 9);
  REQUIRE(p.size() == 4);
  int pos = 0;
  for (const Pair& pr : p) {
    const bool same = d.samples[pr.a].identity == d.samples[pr.b].identity;
    CHECK(same == pr.same);
    CHECK(pr.a != pr.b);
    CHECK(std::find(d.test.begin(), d.test.end(), pr.a) != d.test.end());
    if (pr.same) {
      ++pos;
      CHECK(d.samples[pr.a].expression != d.samples[pr.b].expression);
    }
  }
  CHECK(pos == 2);
  CHECK(sample_pairs(d, d.test, 4, 9) == p);
  const PairSet odd = sample_pairs(d, d.test, 7, 9);
  const auto n_pos = std::count_if(odd.begin(), odd.end(), [](const Pair& x) { return x.same; });
  CHECK(std::abs(2 * n_pos - 7) == 1);
}

TEST_CASE("pairs need two identities") {
  const Dataset d = generate(small());
  const std::vector<std::size_t> one_id = [&] {
    std::vector<std::size_t> out;
    for (std::size_t i : d.test) {
      if (d.samples[i].identity == 0) out.push_back(i);
    }
    return out;
  }();
  CHECK_THROWS_AS(sample_pairs(d, one_id, 4, 1), Error);
}

TEST_CASE("dataset and pair files round-trip exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "dmtl_synth_test";
  std::filesystem::create_directories(dir);
  const Dataset d = generate(small());
  write_dataset(d, dir / "data.csv");
  const Dataset back = read_dataset(dir / "data.csv");
  CHECK(back.train == d.train);
  CHECK(back.test == d.test);
  REQUIRE(back.samples.size() == d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(back.samples[i].x == d.samples[i].x);
    CHECK(back.samples[i].identity == d.samples[i].identity);
  }
  CHECK(back.config.seed == d.config.seed);
  const PairSet p = sample_pairs(d, d.val, 10, 2);
  write_pairs(p, dir / "pairs.csv");
  CHECK(read_pairs(dir / "pairs.csv") == p);
  CHECK_THROWS_AS(read_dataset(dir / "missing.csv"), Error);
  std::filesystem::remove_all(dir);
}
