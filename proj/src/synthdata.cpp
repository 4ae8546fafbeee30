#include "dmtl/synthdata.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dmtl/error.hpp"

namespace dmtl {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line_no,
                              const std::string& what) {
  fail(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_identities < 2 || n_expressions < 2 || dim < 1 || samples_per_cell < 1) {
    fail(ErrorCode::kConfig, "synth config: label counts must be >= 2 and dim, samples >= 1");
  }
  if (!(identity_scale > 0.0) || !(expression_scale > 0.0) || !(noise >= 0.0)) {
    fail(ErrorCode::kConfig, "synth config: scales must be > 0 and noise >= 0");
  }
}

Matrix Dataset::features(std::span<const std::size_t> indices) const {
  const std::size_t d = samples.empty() ? config.dim : samples.front().x.size();
  Matrix m(indices.size(), d);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Vector& x = samples.at(indices[r]).x;
    std::copy(x.begin(), x.end(), m.row(r).begin());
  }
  return m;
}

std::vector<int> Dataset::identities(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples.at(i).identity);
  return out;
}

std::vector<int> Dataset::expressions(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples.at(i).expression);
  return out;
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t per_cell = cfg.samples_per_cell;
  const std::size_t n_val = per_cell * 15 / 100;
  const std::size_t n_test = per_cell * 15 / 100;
  const std::size_t n_train = per_cell - n_val - n_test;
  if (n_val < 1 || n_test < 1 || n_train < 1) {
    fail(ErrorCode::kConfig,
         "synth config: samples_per_cell = " + std::to_string(per_cell) +
             " leaves an empty split (need at least 7 per cell)");
  }

  Rng rng(cfg.seed);
  Rng factor_rng = rng.split(0);
  Rng sample_rng = rng.split(1);
  Rng split_rng = rng.split(2);

  auto draw = [&](Rng& r) {
    Vector v(cfg.dim);
    for (double& x : v) x = r.normal();
    return v;
  };
  std::vector<Vector> mu(cfg.n_identities);
  std::vector<Vector> nu(cfg.n_expressions);
  for (auto& v : mu) v = draw(factor_rng);
  for (auto& v : nu) v = draw(factor_rng);

  std::vector<Sample> train, val, test;
  for (std::size_t id = 0; id < cfg.n_identities; ++id) {
    for (std::size_t ex = 0; ex < cfg.n_expressions; ++ex) {
      std::vector<Sample> cell;
      for (std::size_t s = 0; s < per_cell; ++s) {
        Sample sample{Vector(cfg.dim), static_cast<int>(id), static_cast<int>(ex)};
        for (std::size_t k = 0; k < cfg.dim; ++k) {
          sample.x[k] = cfg.identity_scale * mu[id][k] + cfg.expression_scale * nu[ex][k] +
                        cfg.noise * sample_rng.normal();
        }
        cell.push_back(std::move(sample));
      }
      split_rng.shuffle(cell);
      for (std::size_t s = 0; s < per_cell; ++s) {
        auto& dest = s < n_train ? train : (s < n_train + n_val ? val : test);
        dest.push_back(std::move(cell[s]));
      }
    }
  }

  Dataset data;
  data.config = cfg;
  for (auto* part : {&train, &val, &test}) {
    auto& indices = part == &train ? data.train : (part == &val ? data.val : data.test);
    for (auto& s : *part) {
      indices.push_back(data.samples.size());
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

PairSet sample_pairs(const Dataset& data, std::span<const std::size_t> split, std::size_t n_pairs,
                     std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_identity;
  for (std::size_t i : split) by_identity[data.samples.at(i).identity].push_back(i);
  if (by_identity.size() < 2) {
    fail(ErrorCode::kConfig, "sample_pairs: split needs at least two identities");
  }
  std::vector<int> pairable;
  for (const auto& [id, members] : by_identity) {
    if (members.size() >= 2) pairable.push_back(id);
  }
  if (pairable.empty()) {
    fail(ErrorCode::kConfig, "sample_pairs: no identity has two samples in the split");
  }

  Rng rng(seed);
  PairSet pairs;
  pairs.reserve(n_pairs);
  const std::size_t n_pos = n_pairs - n_pairs / 2;
  for (std::size_t p = 0; p < n_pos; ++p) {
    const auto& members = by_identity[pairable[rng.index(pairable.size())]];
    const std::size_t a = members[rng.index(members.size())];
    std::vector<std::size_t> other_expr, other_any;
    for (std::size_t b : members) {
      if (b == a) continue;
      other_any.push_back(b);
      if (data.samples[b].expression != data.samples[a].expression) other_expr.push_back(b);
    }
    const auto& pool = other_expr.empty() ? other_any : other_expr;
    pairs.push_back({a, pool[rng.index(pool.size())], true});
  }
  for (std::size_t p = n_pos; p < n_pairs; ++p) {
    const std::size_t a = split[rng.index(split.size())];
    std::size_t b = a;
    while (data.samples[b].identity == data.samples[a].identity) {
      b = split[rng.index(split.size())];
    }
    pairs.push_back({a, b, false});
  }
  return pairs;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  const SynthConfig& c = data.config;
  out << "# dmtl-dataset v1\n"
      << "# n_identities = " << c.n_identities << "\n"
      << "# n_expressions = " << c.n_expressions << "\n"
      << "# dim = " << c.dim << "\n"
      << "# samples_per_cell = " << c.samples_per_cell << "\n"
      << "# identity_scale = " << format_double(c.identity_scale) << "\n"
      << "# expression_scale = " << format_double(c.expression_scale) << "\n"
      << "# noise = " << format_double(c.noise) << "\n"
      << "# seed = " << c.seed << "\n"
      << "# train = " << data.train.size() << "\n"
      << "# val = " << data.val.size() << "\n"
      << "# test = " << data.test.size() << "\n";
  for (std::size_t k = 0; k < c.dim; ++k) out << "x" << k << ",";
  out << "identity,expression\n";
  for (const Sample& s : data.samples) {
    for (double v : s.x) out << format_double(v) << ",";
    out << s.identity << "," << s.expression << "\n";
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::map<std::string, std::string> header;
  std::string line;
  std::size_t line_no = 0;
  bool saw_columns = false;
  Dataset data;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" #\t");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      header[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
      continue;
    }
    if (!saw_columns) {
      saw_columns = true;
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() < 3) parse_error(path, line_no, "too few columns");
    Sample s;
    try {
      for (std::size_t k = 0; k + 2 < cells.size(); ++k) s.x.push_back(std::stod(cells[k]));
      s.identity = std::stoi(cells[cells.size() - 2]);
      s.expression = std::stoi(cells.back());
    } catch (const std::exception&) {
      parse_error(path, line_no, "malformed number");
    }
    data.samples.push_back(std::move(s));
  }
  try {
    SynthConfig& c = data.config;
    c.n_identities = std::stoul(header.at("n_identities"));
    c.n_expressions = std::stoul(header.at("n_expressions"));
    c.dim = std::stoul(header.at("dim"));
    c.samples_per_cell = std::stoul(header.at("samples_per_cell"));
    c.identity_scale = std::stod(header.at("identity_scale"));
    c.expression_scale = std::stod(header.at("expression_scale"));
    c.noise = std::stod(header.at("noise"));
    c.seed = std::stoull(header.at("seed"));
    const std::size_t n_train = std::stoul(header.at("train"));
    const std::size_t n_val = std::stoul(header.at("val"));
    const std::size_t n_test = std::stoul(header.at("test"));
    if (n_train + n_val + n_test != data.samples.size()) {
      fail(ErrorCode::kIo, path.string() + ": split counts do not match row count");
    }
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      (i < n_train ? data.train : (i < n_train + n_val ? data.val : data.test)).push_back(i);
    }
  } catch (const std::out_of_range&) {
    fail(ErrorCode::kIo, path.string() + ": missing header field");
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::kIo, path.string() + ": malformed header field");
  }
  return data;
}

void write_pairs(const PairSet& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "index_a,index_b,same\n";
  for (const Pair& p : pairs) out << p.a << "," << p.b << "," << (p.same ? 1 : 0) << "\n";
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

PairSet read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  PairSet pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) parse_error(path, line_no, "expected 3 columns");
    try {
      pairs.push_back({std::stoul(cells[0]), std::stoul(cells[1]), std::stoi(cells[2]) != 0});
    } catch (const std::exception&) {
      parse_error(path, line_no, "malformed number");
    }
  }
  return pairs;
}

}  // namespace dmtl
