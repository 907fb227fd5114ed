#include "stgp/commands.hpp"

#include <chrono>
#include <cmath>
#include <initializer_list>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stgp/error.hpp"
#include "stgp/inference.hpp"
#include "stgp/kronalg.hpp"
#include "stgp/predict.hpp"
#include "stgp/samples_io.hpp"
#include "stgp/simharness.hpp"
#include "stgp/stdata.hpp"
#include "stgp/summarize.hpp"

namespace stgp {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CapacityError*>(&e)) return kExitCapacity;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const Error*>(&e)) return kExitConfig;
  if (dynamic_cast<const json::exception*>(&e)) return kExitConfig;
  return kExitUnexpected;
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "config must be a JSON object" : where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key " + (where.empty() ? key : where + "." + key));
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key " + (where.empty() ? std::string(key) : where + "." + key));
  return obj.at(key);
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  const std::string name = where.empty() ? key : where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name + " must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
        throw ConfigError(name + " must be non-negative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(name + " must be a number");
  } else {
    if (!v.is_string()) throw ConfigError(name + " must be a string");
  }
  return v.get<T>();
}

fs::path resolve(const CommandOptions& opt, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : opt.config_dir / path;
}

fs::path out_dir(const json& cfg, const CommandOptions& opt) {
  fs::path dir;
  if (opt.out) {
    dir = *opt.out;
  } else {
    dir = resolve(opt, get_as<std::string>(cfg, "out", "", std::string()));
    if (!cfg.contains("out")) throw ConfigError("missing key out (or pass --out)");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

DatasetFormat dataset_format(const json& cfg, const fs::path& path) {
  if (cfg.contains("format")) return parse_dataset_format(get_as<std::string>(cfg, "format", "", ""));
  return format_from_extension(path);
}

void write_json(const fs::path& path, const ordered_json& j) { atomic_write(path, j.dump(2) + "\n"); }

// -------------------------------------------------------------------------

SimParams sim_from_json(const json& j) {
  check_keys(j, {"ell_x", "ell_t", "ell_xt", "sigma2_eps", "Nx", "Nt", "I", "J", "K"}, "sim");
  SimParams p;
  p.ell_x = get_as<double>(j, "ell_x", "sim", p.ell_x);
  p.ell_t = get_as<double>(j, "ell_t", "sim", p.ell_t);
  p.ell_xt = get_as<double>(j, "ell_xt", "sim", std::sqrt(p.ell_x * p.ell_t));
  p.sigma2_eps = get_as<double>(j, "sigma2_eps", "sim", p.sigma2_eps);
  p.Nx = get_as<int>(j, "Nx", "sim", p.Nx);
  p.Nt = get_as<int>(j, "Nt", "sim", p.Nt);
  p.I = get_as<int>(j, "I", "sim", p.I);
  p.J = get_as<int>(j, "J", "sim", p.J);
  p.K = get_as<int>(j, "K", "sim", p.K);
  p.validate();
  return p;
}

ordered_json sim_to_json(const SimParams& p) {
  return ordered_json{{"kind", "stgp"},     {"ell_x", p.ell_x}, {"ell_t", p.ell_t}, {"ell_xt", p.ell_xt},
                      {"sigma2_eps", p.sigma2_eps}, {"Nx", p.Nx}, {"Nt", p.Nt},      {"I", p.mesh_I()},
                      {"J", p.mesh_J()},     {"K", p.K},         {"seed", p.seed}};
}

ImageDemoParams image_from_json(const json& j) {
  check_keys(j, {"rows", "cols", "J", "K", "cohorts", "noise"}, "image");
  ImageDemoParams p;
  p.rows = get_as<int>(j, "rows", "image", p.rows);
  p.cols = get_as<int>(j, "cols", "image", p.cols);
  p.J = get_as<int>(j, "J", "image", p.J);
  p.K = get_as<int>(j, "K", "image", p.K);
  p.cohorts = get_as<int>(j, "cohorts", "image", p.cohorts);
  p.noise = get_as<double>(j, "noise", "image", p.noise);
  p.validate();
  return p;
}

RunParams run_from_json(const json& j) {
  check_keys(j, {"n_iter", "burn_in", "thin", "seed", "sample_m"}, "run");
  RunParams r;
  r.n_iter = get_as<long>(j, "n_iter", "run", r.n_iter);
  r.burn_in = get_as<long>(j, "burn_in", "run", r.burn_in);
  r.thin = get_as<long>(j, "thin", "run", r.thin);
  r.seed = get_as<std::uint64_t>(j, "seed", "run", r.seed);
  r.sample_m = get_as<bool>(j, "sample_m", "run", r.sample_m);
  r.validate();
  return r;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a number or a non-empty array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

std::string coords_id(const Eigen::VectorXd& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? ";" : "") + format_double(x(i));
  return s;
}

}  // namespace

// -------------------------------------------------------------------------

void cmd_simulate(const json& cfg, const CommandOptions& opt) {
  check_keys(cfg, {"kind", "sim", "image", "seed", "format", "out"}, "");
  const std::string kind = get_as<std::string>(cfg, "kind", "", "stgp");
  const std::uint64_t seed = opt.seed ? *opt.seed : get_as<std::uint64_t>(cfg, "seed", "", 1);
  const DatasetFormat fmt = parse_dataset_format(get_as<std::string>(cfg, "format", "", "binary"));
  const std::string ext = fmt == DatasetFormat::csv ? ".csv" : ".bin";

  if (kind == "stgp") {
    if (cfg.contains("image")) throw ConfigError("key image is only valid with kind image_demo");
    SimParams p = sim_from_json(cfg.contains("sim") ? cfg.at("sim") : json::object());
    p.seed = seed;
    const SpatioTemporalDataset ds = generate(p);
    const fs::path dir = out_dir(cfg, opt);
    save_dataset(ds, dir / ("dataset" + ext), fmt);
    write_json(dir / "truth.json", sim_to_json(p));
  } else if (kind == "image_demo") {
    if (cfg.contains("sim")) throw ConfigError("key sim is only valid with kind stgp");
    ImageDemoParams p = image_from_json(cfg.contains("image") ? cfg.at("image") : json::object());
    p.seed = seed;
    const auto cohorts = generate_image_demo(p);
    const fs::path dir = out_dir(cfg, opt);
    for (std::size_t g = 0; g < cohorts.size(); ++g) {
      save_dataset(cohorts[g], dir / ("cohort_" + std::to_string(g + 1) + ext), fmt);
    }
    write_json(dir / "truth.json", ordered_json{{"kind", "image_demo"},
                                                {"rows", p.rows},
                                                {"cols", p.cols},
                                                {"J", p.J},
                                                {"K", p.K},
                                                {"cohorts", p.cohorts},
                                                {"noise", p.noise},
                                                {"seed", p.seed}});
  } else {
    throw ConfigError("kind must be \"stgp\" or \"image_demo\", got \"" + kind + "\"");
  }
}

void cmd_fit(const json& cfg, const CommandOptions& opt) {
  check_keys(cfg, {"dataset", "format", "prior", "run", "out"}, "");
  const fs::path data_path = resolve(opt, get_as<std::string>(cfg, "dataset", "", ""));
  require(cfg, "dataset", "");
  const PriorConfig prior = prior_from_json(require(cfg, "prior", ""));
  RunParams run = run_from_json(cfg.contains("run") ? cfg.at("run") : json::object());
  if (opt.seed) run.seed = *opt.seed;
  const SpatioTemporalDataset ds = load_dataset(data_path, dataset_format(cfg, data_path));
  const fs::path dir = out_dir(cfg, opt);

  const PosteriorSamples s = fit(ds, prior, run);
  save_samples(s, dir);

  ordered_json report;
  report["draws"] = s.draws.size();
  report["expected_draws"] = run.draw_count();
  if (!s.draws.empty()) {
    double lo = s.draws.front().logpost;
    double hi = lo;
    double sum = 0.0;
    for (const auto& d : s.draws) {
      lo = std::min(lo, d.logpost);
      hi = std::max(hi, d.logpost);
      sum += d.logpost;
    }
    report["logpost"] = {{"min", lo},
                         {"mean", sum / static_cast<double>(s.draws.size())},
                         {"max", hi},
                         {"last", s.draws.back().logpost}};
  }
  const auto& c = s.counters;
  report["slice"] = {{"updates", c.slice.updates},
                     {"evaluations", c.slice.evaluations},
                     {"shrinkages", c.slice.shrinkages},
                     {"evaluations_per_update",
                      c.slice.updates ? static_cast<double>(c.slice.evaluations) / c.slice.updates : 0.0}};
  report["ess"] = {{"updates", c.ess_updates},
                   {"proposals", c.ess_proposals},
                   {"proposals_per_update",
                    c.ess_updates ? static_cast<double>(c.ess_proposals) / c.ess_updates : 0.0}};
  report["wall_seconds"] = s.wall_seconds;
  write_json(dir / "report.json", report);
}

void cmd_predict(const json& cfg, const CommandOptions& opt) {
  check_keys(cfg, {"samples", "dataset", "format", "targets", "add_conditional_variance", "out"}, "");
  const fs::path samples_dir = resolve(opt, get_as<std::string>(cfg, "samples", "", ""));
  require(cfg, "samples", "");
  const fs::path data_path = resolve(opt, get_as<std::string>(cfg, "dataset", "", ""));
  require(cfg, "dataset", "");
  const bool add_var = get_as<bool>(cfg, "add_conditional_variance", "", false);
  const json targets = cfg.contains("targets") ? cfg.at("targets") : json::object();
  check_keys(targets, {"mean", "tesd_future", "tesd_neighbor"}, "targets");
  for (const char* fam : {"mean", "tesd_future", "tesd_neighbor"}) {
    if (targets.contains(fam) && !targets.at(fam).is_array()) {
      throw ConfigError(std::string("targets.") + fam + " must be an array");
    }
  }

  const PosteriorSamples samples = load_samples(samples_dir);
  const SpatioTemporalDataset ds = load_dataset(data_path, dataset_format(cfg, data_path));
  const fs::path dir = out_dir(cfg, opt);
  const Predictor pred(samples, ds);

  if (targets.contains("tesd_neighbor") && !targets.at("tesd_neighbor").empty() &&
      samples.prior.model == ModelKind::I) {
    throw DomainError("tesd_neighbor prediction is unsupported for model I");
  }
  if (targets.contains("tesd_future") && !targets.at("tesd_future").empty() &&
      samples.prior.model == ModelKind::I) {
    throw DomainError("tesd_future prediction is unsupported for model I");
  }

  if (targets.contains("mean") && !targets.at("mean").empty()) {
    std::vector<SpaceTimePoint> pts;
    for (std::size_t n = 0; n < targets.at("mean").size(); ++n) {
      const json& t = targets.at("mean")[n];
      const std::string where = "targets.mean[" + std::to_string(n) + "]";
      check_keys(t, {"x", "t"}, where);
      SpaceTimePoint z;
      z.x = vector_from_json(require(t, "x", where), where + ".x");
      z.t = get_as<double>(t, "t", where, 0.0);
      require(t, "t", where);
      pts.push_back(std::move(z));
    }
    const auto res = pred.mean(pts);
    std::vector<PredictionRow> rows;
    for (std::size_t n = 0; n < res.size(); ++n) {
      rows.push_back({"x=" + coords_id(pts[n].x) + "|t=" + format_double(pts[n].t), res[n].mean, res[n].lo,
                      res[n].hi});
    }
    write_prediction_csv(dir / "mean.csv", rows);
  }

  if (targets.contains("tesd_future") && !targets.at("tesd_future").empty()) {
    std::vector<PredictionRow> rows;
    for (const json& t : targets.at("tesd_future")) {
      if (!t.is_number()) throw ConfigError("targets.tesd_future must contain numbers");
      const double ts = t.get<double>();
      const TesdPrediction p = pred.tesd_future(ts, add_var);
      for (Eigen::Index b = 0; b < p.mean.cols(); ++b)
        for (Eigen::Index a = 0; a <= b; ++a)
          rows.push_back({"t=" + format_double(ts) + "|i=" + std::to_string(a + 1) + "|i2=" + std::to_string(b + 1),
                          p.mean(a, b), p.lo(a, b), p.hi(a, b)});
    }
    write_prediction_csv(dir / "tesd_future.csv", rows);
  }

  if (targets.contains("tesd_neighbor") && !targets.at("tesd_neighbor").empty()) {
    std::vector<PredictionRow> rows;
    long dropped = 0;
    for (std::size_t n = 0; n < targets.at("tesd_neighbor").size(); ++n) {
      const Eigen::VectorXd xs =
          vector_from_json(targets.at("tesd_neighbor")[n], "targets.tesd_neighbor[" + std::to_string(n) + "]");
      const TesdPrediction p = pred.tesd_neighbor(xs);
      dropped += p.dropped_terms;
      for (Eigen::Index j = 0; j < p.mean.cols(); ++j)
        for (Eigen::Index i = 0; i < p.mean.rows(); ++i)
          rows.push_back({"x*=" + coords_id(xs) + "|t=" + format_double(ds.time.times(j)) + "|i=" +
                              std::to_string(i + 1),
                          p.mean(i, j), p.lo(i, j), p.hi(i, j)});
    }
    write_prediction_csv(dir / "tesd_neighbor.csv", rows);
    if (dropped > 0) write_json(dir / "warnings.json", ordered_json{{"nystrom_dropped_terms", dropped}});
  }
}

void cmd_summarize(const json& cfg, const CommandOptions& opt) {
  check_keys(cfg, {"samples", "dataset", "format", "time_index", "quantile", "grid", "truth", "out"}, "");
  const fs::path samples_dir = resolve(opt, get_as<std::string>(cfg, "samples", "", ""));
  require(cfg, "samples", "");
  const fs::path data_path = resolve(opt, get_as<std::string>(cfg, "dataset", "", ""));
  require(cfg, "dataset", "");
  const double q = get_as<double>(cfg, "quantile", "", 0.9);
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must lie in (0, 1)");

  const PosteriorSamples samples = load_samples(samples_dir);
  const SpatioTemporalDataset ds = load_dataset(data_path, dataset_format(cfg, data_path));
  if (samples.I != ds.I() || samples.J != ds.J()) throw DomainError("samples do not match the dataset grid");
  const int time_index = get_as<int>(cfg, "time_index", "", ds.J());
  if (time_index < 1 || time_index > ds.J()) throw ConfigError("time_index must lie in 1..J");

  int rows = ds.I();
  int cols = 1;
  if (cfg.contains("grid")) {
    check_keys(cfg.at("grid"), {"rows", "cols"}, "grid");
    rows = get_as<int>(cfg.at("grid"), "rows", "grid", 0);
    cols = get_as<int>(cfg.at("grid"), "cols", "grid", 0);
  } else if (samples.prior.spatial_kernel == SpatialKernelKind::graph_laplacian) {
    rows = samples.prior.graph.rows;
    cols = samples.prior.graph.cols;
  }
  if (static_cast<long>(rows) * cols != ds.I()) throw ConfigError("grid rows*cols must equal I");

  const fs::path dir = out_dir(cfg, opt);
  const SpatialModel space(ds.space, samples.prior);
  TesdOptions topt;
  topt.time_indices = {time_index - 1};
  const TesdEstimate est = estimate_tesd(samples, space, topt);
  const ConnectionGraph g = connection_graph(est.corr.front(), q);
  const Eigen::MatrixXi map = g.degree_map(rows, cols);

  ordered_json cj;
  cj["time_index"] = time_index;
  cj["quantile"] = q;
  cj["threshold"] = g.threshold;
  cj["rows"] = rows;
  cj["cols"] = cols;
  json grid = json::array();
  for (int r = 0; r < rows; ++r) {
    json row = json::array();
    for (int c = 0; c < cols; ++c) row.push_back(map(r, c));
    grid.push_back(row);
  }
  cj["degree_map"] = grid;
  write_json(dir / "connection_graph.json", cj);

  if (cfg.contains("truth")) {
    const fs::path truth_path = resolve(opt, get_as<std::string>(cfg, "truth", "", ""));
    json tj;
    try {
      tj = json::parse(read_file(truth_path));
    } catch (const json::exception& e) {
      throw ParseError(truth_path.string() + ": " + e.what());
    }
    if (tj.value("kind", std::string()) != "stgp") throw ConfigError("truth file is not from an stgp simulation");
    TruthOracle oracle;
    oracle.p.ell_x = tj.at("ell_x").get<double>();
    oracle.p.ell_t = tj.at("ell_t").get<double>();
    oracle.p.ell_xt = tj.at("ell_xt").get<double>();
    oracle.p.sigma2_eps = tj.at("sigma2_eps").get<double>();
    if (ds.space.dim() != 1) throw DomainError("truth comparison needs a 1-d spatial grid");
    const TesdEstimate all = estimate_tesd(samples, space);
    const TesdError e = tesd_error(all, ds.space.points.col(0), ds.time.times, oracle);
    write_json(dir / "tesd_error.json", ordered_json{{"rmse_overall", e.rmse_overall},
                                                     {"flatness_estimate", e.flatness_estimate},
                                                     {"flatness_truth", e.flatness_truth}});
  }
}

namespace {

struct BenchInstance {
  Eigen::MatrixXd c_t;
  std::shared_ptr<const MercerBasis> basis;
  Eigen::MatrixXd lambda;
  Eigen::VectorXd v;
  int K;
};

BenchInstance bench_instance(int I, int J, int L, int K, Rng& rng) {
  BenchInstance b;
  const Eigen::MatrixXd a = rng.normal_matrix(J, J);
  b.c_t = a * a.transpose() / J + Eigen::MatrixXd::Identity(J, J);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.normal_matrix(I, L));
  MercerBasis basis;
  basis.phi = qr.householderQ() * Eigen::MatrixXd::Identity(I, L);
  basis.lambda0 = Eigen::VectorXd::Ones(L);
  b.basis = std::make_shared<const MercerBasis>(std::move(basis));
  b.lambda = rng.normal_matrix(J, L);
  b.v = rng.normal_vector(static_cast<Eigen::Index>(I) * J);
  b.K = K;
  return b;
}

double dense_path(const BenchInstance& b) {
  const Eigen::Index I = b.basis->I();
  const Eigen::Index J = b.c_t.rows();
  Eigen::MatrixXd c(I * J, I * J);
  c.setZero();
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index jp = 0; jp < J; ++jp) c.block(j * I, jp * I, I, I).diagonal().setConstant(b.c_t(j, jp));
    c.block(j * I, j * I, I, I) += assemble_cxt(*b.basis, b.lambda, static_cast<int>(j)) / b.K;
  }
  const auto llt = checked_llt(c, "dense C*");
  return llt.solve(b.v).sum() + llt_logdet(llt);
}

double structured_path(const BenchInstance& b) {
  const Model2Marginal m(b.c_t, b.basis, b.lambda, b.K);
  return m.inverse_apply(b.v).sum() + m.logdet();
}

template <typename F>
std::pair<double, double> time_ms(F&& f, int repeats) {
  std::vector<double> t;
  volatile double sink = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const auto s = std::chrono::steady_clock::now();
    sink = sink + f();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s).count());
  }
  double mean = 0.0;
  for (double x : t) mean += x;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double x : t) var += (x - mean) * (x - mean);
  return {mean, t.size() > 1 ? std::sqrt(var / static_cast<double>(t.size() - 1)) : 0.0};
}

}  // namespace

void cmd_bench(const json& cfg, const CommandOptions& opt) {
  check_keys(cfg, {"sizes", "repeats", "dense_cap", "seed", "out"}, "");
  const json& sizes = require(cfg, "sizes", "");
  if (!sizes.is_array() || sizes.empty()) throw ConfigError("sizes must be a non-empty array of [I, J, L, K]");
  const int repeats = get_as<int>(cfg, "repeats", "", 3);
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  const long cap = get_as<long>(cfg, "dense_cap", "", static_cast<long>(kDefaultDenseCap));
  const std::uint64_t seed = opt.seed ? *opt.seed : get_as<std::uint64_t>(cfg, "seed", "", 1);
  const fs::path dir = out_dir(cfg, opt);

  ordered_json table = json::array();
  bool structured_not_slower = true;
  long largest_dense = -1;
  for (std::size_t n = 0; n < sizes.size(); ++n) {
    const json& s = sizes[n];
    if (!s.is_array() || s.size() != 4) throw ConfigError("sizes entries must be [I, J, L, K]");
    const int I = s[0].get<int>();
    const int J = s[1].get<int>();
    const int L = s[2].get<int>();
    const int K = s[3].get<int>();
    if (I < 1 || J < 1 || L < 1 || L > I || K < 1) throw ConfigError("invalid bench size");
    Rng rng(seed, n);
    const BenchInstance b = bench_instance(I, J, L, K, rng);
    const long n_dense = static_cast<long>(I) * J;
    ordered_json row{{"I", I}, {"J", J}, {"L", L}, {"K", K}};
    const auto [sm, ssd] = time_ms([&] { return structured_path(b); }, repeats);
    row["m2_structured_ms"] = sm;
    row["m2_structured_sd_ms"] = ssd;
    row["structured_peak_bytes"] = 8.0 * (static_cast<double>(L + 1) * J * J + 3.0 * I * J + I * L);
    if (n_dense <= cap) {
      const auto [dm, dsd] = time_ms([&] { return dense_path(b); }, repeats);
      row["dense_oracle_ms"] = dm;
      row["dense_oracle_sd_ms"] = dsd;
      row["dense_peak_bytes"] = 8.0 * 2.0 * static_cast<double>(n_dense) * n_dense;
      row["ratio"] = dm / sm;
      if (n_dense >= largest_dense) {
        largest_dense = n_dense;
        structured_not_slower = sm <= dm;
      }
    } else {
      row["dense_oracle_ms"] = nullptr;
      row["dense_skipped"] = "IJ=" + std::to_string(n_dense) + " over the dense cap " + std::to_string(cap);
    }
    table.push_back(row);
  }
  ordered_json out;
  out["repeats"] = repeats;
  out["dense_cap"] = cap;
  out["results"] = table;
  out["structured_not_slower_at_largest_dense_size"] = structured_not_slower;
  write_json(dir / "bench.json", out);
}

int run_command(const std::string& command, const fs::path& config, std::optional<std::uint64_t> seed,
                std::optional<fs::path> out, std::ostream& err) {
  try {
    json cfg;
    try {
      cfg = json::parse(read_file(config));
    } catch (const json::exception& e) {
      throw ConfigError(config.string() + ": " + e.what());
    }
    CommandOptions opt;
    opt.config_dir = config.has_parent_path() ? config.parent_path() : fs::path(".");
    opt.seed = seed;
    opt.out = std::move(out);
    if (command == "simulate") {
      cmd_simulate(cfg, opt);
    } else if (command == "fit") {
      cmd_fit(cfg, opt);
    } else if (command == "predict") {
      cmd_predict(cfg, opt);
    } else if (command == "summarize") {
      cmd_summarize(cfg, opt);
    } else if (command == "bench") {
      cmd_bench(cfg, opt);
    } else {
      throw ConfigError("unknown command " + command);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace stgp
