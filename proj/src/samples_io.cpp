#include "stgp/samples_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stgp/error.hpp"

namespace stgp {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void put_f64(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_f64(const std::string& in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::array<double, 3> triple(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string("prior.") + key + " must be an array of 3 numbers");
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string("prior.") + key + " must be an array of 3 numbers");
    out[i] = j[i].get<double>();
  }
  return out;
}

int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError(field + " must be an integer");
  return j.get<int>();
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field + " must be a number");
  return j.get<double>();
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(where + ": bad number \"" + s + "\"");
  return v;
}

}  // namespace

ordered_json prior_to_json(const PriorConfig& p) {
  ordered_json j;
  j["model"] = to_string(p.model);
  j["spatial_kernel"] = to_string(p.spatial_kernel);
  j["L"] = p.L;
  j["kappa"] = p.kappa;
  j["a"] = p.a;
  j["b"] = p.b;
  j["m"] = p.m;
  j["V"] = p.V;
  j["s_exp"] = p.s_exp;
  if (p.spatial_kernel == SpatialKernelKind::graph_laplacian) {
    j["graph"] = {{"rows", p.graph.rows}, {"cols", p.graph.cols}, {"w", p.graph.w}, {"s", p.graph.s}};
  }
  return j;
}

PriorConfig prior_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("prior must be an object");
  PriorConfig p;
  for (const auto& [key, v] : j.items()) {
    if (key == "model") {
      if (!v.is_string()) throw ConfigError("prior.model must be a string");
      p.model = parse_model_kind(v.get<std::string>());
    } else if (key == "spatial_kernel") {
      if (!v.is_string()) throw ConfigError("prior.spatial_kernel must be a string");
      p.spatial_kernel = parse_spatial_kernel(v.get<std::string>());
    } else if (key == "L") {
      p.L = get_int(v, "prior.L");
    } else if (key == "kappa") {
      p.kappa = get_number(v, "prior.kappa");
    } else if (key == "a") {
      p.a = triple(v, "a");
    } else if (key == "b") {
      p.b = triple(v, "b");
    } else if (key == "m") {
      p.m = triple(v, "m");
    } else if (key == "V") {
      p.V = triple(v, "V");
    } else if (key == "s_exp") {
      p.s_exp = get_number(v, "prior.s_exp");
    } else if (key == "graph") {
      if (!v.is_object()) throw ConfigError("prior.graph must be an object");
      for (const auto& [gk, gv] : v.items()) {
        if (gk == "rows") p.graph.rows = get_int(gv, "prior.graph.rows");
        else if (gk == "cols") p.graph.cols = get_int(gv, "prior.graph.cols");
        else if (gk == "w") p.graph.w = get_int(gv, "prior.graph.w");
        else if (gk == "s") p.graph.s = get_int(gv, "prior.graph.s");
        else throw ConfigError("unknown key prior.graph." + gk);
      }
    } else {
      throw ConfigError("unknown key prior." + key);
    }
  }
  p.validate();
  return p;
}

void save_samples(const PosteriorSamples& s, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create samples directory " + dir.string() + ": " + ec.message());
  const int L = s.prior.L;

  ordered_json meta;
  meta["format_version"] = 1;
  meta["I"] = s.I;
  meta["J"] = s.J;
  meta["K"] = s.K;
  meta["L"] = L;
  meta["draws"] = s.draws.size();
  meta["run"] = {{"n_iter", s.run.n_iter},
                 {"burn_in", s.run.burn_in},
                 {"thin", s.run.thin},
                 {"seed", s.run.seed},
                 {"sample_m", s.run.sample_m}};
  meta["prior"] = prior_to_json(s.prior);
  meta["wall_seconds"] = s.wall_seconds;
  meta["counters"] = {{"slice_updates", s.counters.slice.updates},
                      {"slice_evaluations", s.counters.slice.evaluations},
                      {"slice_shrinkages", s.counters.slice.shrinkages},
                      {"ess_updates", s.counters.ess_updates},
                      {"ess_proposals", s.counters.ess_proposals}};
  atomic_write(dir / "meta.json", meta.dump(2) + "\n");

  std::ostringstream csv;
  csv << "draw,sigma2_eps,sigma2_t,sigma2_u,eta_x,eta_t,eta_u,logpost\n";
  for (std::size_t n = 0; n < s.draws.size(); ++n) {
    const auto& h = s.draws[n].h;
    csv << n + 1 << ',' << format_double(h.sigma2_eps) << ',' << format_double(h.sigma2_t) << ','
        << format_double(h.sigma2_u) << ',' << format_double(h.eta_x) << ',' << format_double(h.eta_t)
        << ',' << format_double(h.eta_u) << ',' << format_double(s.draws[n].logpost) << '\n';
  }
  atomic_write(dir / "hyper.csv", csv.str());

  std::string lam;
  lam.reserve(s.draws.size() * s.J * L * 8);
  for (const auto& d : s.draws)
    for (int j = 0; j < s.J; ++j)
      for (int l = 0; l < L; ++l) put_f64(lam, d.lambda(j, l));
  atomic_write(dir / "lambda.bin", lam);

  if (s.run.sample_m) {
    std::string m;
    for (const auto& d : s.draws)
      for (Eigen::Index i = 0; i < d.m.size(); ++i) put_f64(m, d.m(i));
    atomic_write(dir / "m.bin", m);
  }
}

PosteriorSamples load_samples(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("samples directory " + dir.string() + " does not exist");
  json meta;
  try {
    meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw ParseError("meta.json: " + std::string(e.what()));
  }
  PosteriorSamples s;
  std::size_t n_draws = 0;
  try {
    s.I = meta.at("I").get<int>();
    s.J = meta.at("J").get<int>();
    s.K = meta.at("K").get<int>();
    n_draws = meta.at("draws").get<std::size_t>();
    const json& run = meta.at("run");
    s.run.n_iter = run.at("n_iter").get<long>();
    s.run.burn_in = run.at("burn_in").get<long>();
    s.run.thin = run.at("thin").get<long>();
    s.run.seed = run.at("seed").get<std::uint64_t>();
    s.run.sample_m = run.at("sample_m").get<bool>();
    s.wall_seconds = meta.value("wall_seconds", 0.0);
  } catch (const json::exception& e) {
    throw ParseError("meta.json: " + std::string(e.what()));
  }
  s.prior = prior_from_json(meta.at("prior"));
  const int L = s.prior.L;

  std::istringstream csv(read_file(dir / "hyper.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<HyperScalars> hs;
  std::vector<double> lps;
  int row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string where = "hyper.csv row " + std::to_string(row);
    if (cells.size() != 8) throw ParseError(where + ": expected 8 columns, got " + std::to_string(cells.size()));
    HyperScalars h;
    h.sigma2_eps = parse_double(cells[1], where);
    h.sigma2_t = parse_double(cells[2], where);
    h.sigma2_u = parse_double(cells[3], where);
    h.eta_x = parse_double(cells[4], where);
    h.eta_t = parse_double(cells[5], where);
    h.eta_u = parse_double(cells[6], where);
    hs.push_back(h);
    lps.push_back(parse_double(cells[7], where));
  }
  if (hs.size() != n_draws) throw ParseError("hyper.csv has " + std::to_string(hs.size()) + " draws, meta says " + std::to_string(n_draws));

  const std::string lam = read_file(dir / "lambda.bin");
  const std::size_t per = static_cast<std::size_t>(s.J) * L;
  if (lam.size() != n_draws * per * 8) throw ParseError("lambda.bin has the wrong size");
  std::string mbytes;
  const std::size_t per_m = static_cast<std::size_t>(s.I) * s.J;
  if (s.run.sample_m) {
    mbytes = read_file(dir / "m.bin");
    if (mbytes.size() != n_draws * per_m * 8) throw ParseError("m.bin has the wrong size");
  }
  s.draws.resize(n_draws);
  for (std::size_t n = 0; n < n_draws; ++n) {
    Draw& d = s.draws[n];
    d.h = hs[n];
    d.logpost = lps[n];
    d.lambda.resize(s.J, L);
    for (int j = 0; j < s.J; ++j)
      for (int l = 0; l < L; ++l) d.lambda(j, l) = get_f64(lam, ((n * per) + j * L + l) * 8);
    if (s.run.sample_m) {
      d.m.resize(static_cast<Eigen::Index>(per_m));
      for (std::size_t i = 0; i < per_m; ++i) d.m(static_cast<Eigen::Index>(i)) = get_f64(mbytes, (n * per_m + i) * 8);
    }
  }
  return s;
}

}  // namespace stgp
