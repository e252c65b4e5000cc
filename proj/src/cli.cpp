#include "posenc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "posenc/analysis.hpp"
#include "posenc/data.hpp"
#include "posenc/errors.hpp"
#include "posenc/format.hpp"
#include "posenc/serialize.hpp"
#include "posenc/train.hpp"

namespace fs = std::filesystem;

namespace posenc::cli {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Flags shared by train and sweep. Values only override the config when given.
struct TrainFlags {
  std::string config_path;
  std::string model, optimizer, mode;
  std::size_t epochs = 0, batch_size = 0, n_bin = 0, s = 0;
  double lr = 0, beta1 = 0, beta2 = 0, eps = 0, lambda = 0, padding = 0, x_min = 0, x_max = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON train config; flags override its values");
    opts["model"] = app->add_option("--model", model, "linreg | mlp | posenc-linear | posenc-mlp");
    opts["epochs"] = app->add_option("--epochs", epochs);
    opts["batch_size"] = app->add_option("--batch-size", batch_size, "0 = full batch");
    opts["optimizer"] = app->add_option("--optimizer", optimizer, "adam | sgd");
    opts["lr"] = app->add_option("--lr", lr);
    opts["beta1"] = app->add_option("--beta1", beta1);
    opts["beta2"] = app->add_option("--beta2", beta2);
    opts["eps"] = app->add_option("--eps", eps);
    opts["lambda"] = app->add_option("--lambda", lambda, "smoothness weight");
    opts["seed"] = app->add_option("--seed", seed);
    opts["padding"] = app->add_option("--padding", padding, "grid padding as a fraction of the data range");
    opts["n_bin"] = app->add_option("--nbin", n_bin);
    opts["s"] = app->add_option("--s", s, "embedding size");
    opts["mode"] = app->add_option("--mode", mode, "cubic_hermite | linear");
    opts["hidden"] = app->add_option("--hidden", hidden, "MLP hidden widths")->delimiter(',');
    opts["x_min"] = app->add_option("--x-min", x_min);
    opts["x_max"] = app->add_option("--x-max", x_max);
  }

  bool given(const std::string& key) const { return opts.at(key)->count() > 0; }

  // Config file first, then explicit flags, collected into one JSON object so
  // a single merge validates everything.
  TrainConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      j = read_json(config_path);
      if (!j.is_object()) throw ValidationError({"config file must hold a JSON object"});
    }
    if (given("model")) j["model"] = model;
    if (given("epochs")) j["epochs"] = epochs;
    if (given("batch_size")) j["batch_size"] = batch_size;
    if (given("optimizer")) j["optimizer"] = optimizer;
    if (given("lr")) j["lr"] = lr;
    if (given("beta1")) j["beta1"] = beta1;
    if (given("beta2")) j["beta2"] = beta2;
    if (given("eps")) j["eps"] = eps;
    if (given("lambda")) j["lambda"] = lambda;
    if (given("seed")) j["seed"] = seed;
    if (given("padding")) j["padding"] = padding;
    if (given("n_bin")) j["n_bin"] = n_bin;
    if (given("s")) j["s"] = s;
    if (given("mode")) j["mode"] = mode;
    if (given("hidden")) j["hidden"] = hidden;
    if (given("x_min")) j["x_min"] = x_min;
    if (given("x_max")) j["x_max"] = x_max;
    TrainConfig cfg;
    try {
      merge_json(j, cfg);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ValidationError({e.what()});
    }
    return cfg;
  }
};

Dataset load_dataset(const std::string& path, const std::vector<std::size_t>& targets) {
  Dataset ds = read_csv(path);
  validate(ds);
  return targets.empty() ? ds : select_targets(ds, targets);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n = 512;
  double noise = 0.02;
  double epsilon = 1.0, sigma = 1.0;
  double depth = 1.0, width = 1.0, r0 = 1.0;
  std::optional<double> r_min, r_max;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  Dataset ds;
  if (a.kind == "toy") {
    ds = gen_toy(a.seed, a.n, a.noise);
  } else if (a.kind == "lj") {
    ds = gen_lennard_jones(a.seed, a.n, a.epsilon, a.sigma, a.r_min.value_or(0.8 * a.sigma),
                           a.r_max.value_or(3.0 * a.sigma));
  } else if (a.kind == "morse") {
    ds = gen_morse(a.seed, a.n, a.depth, a.width, a.r0, a.r_min.value_or(0.5 * a.r0), a.r_max.value_or(3.0 * a.r0));
  } else {
    throw ValidationError({"unknown dataset kind '" + a.kind + "' (toy | lj | morse)"});
  }
  const fs::path path(a.out);
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) throw std::runtime_error("output directory '" + parent.string() + "' does not exist");
  write_csv(path, ds);
  out << "wrote " << ds.size() << " samples to " << path.string() << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  TrainFlags flags;
  std::string train_path, test_path, out_dir;
  std::vector<std::size_t> targets;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = a.flags.resolve();
  std::vector<std::string> problems = validation_errors(cfg);
  if (a.train_path.empty()) problems.push_back("--train is required");
  if (a.out_dir.empty()) problems.push_back("--out is required");
  if (!problems.empty()) throw ValidationError(problems);

  const Dataset train = load_dataset(a.train_path, a.targets);
  std::optional<Dataset> test;
  if (!a.test_path.empty()) test = load_dataset(a.test_path, a.targets);

  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  nlohmann::json echo = {{"command", "train"}, {"train", a.train_path}, {"test", a.test_path},
                         {"targets", a.targets}, {"config", to_json(cfg)}};
  write_json(dir / "config.json", echo);

  const FitResult res = fit(cfg, train, test ? &*test : nullptr);
  save_model(dir / "model.json", res.model);
  write_log_csv((dir / "log.csv").string(), res.log);
  const auto& last = res.log.back();
  out << "epochs=" << last.epoch << " train_mse=" << format_double(last.train_mse);
  if (test) out << " test_mse=" << format_double(last.test_mse);
  out << " smoothness=" << format_double(last.smoothness_loss) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  TrainFlags flags;
  std::string axis, train_path, test_path, out_dir;
  std::vector<std::size_t> values;
  std::vector<std::size_t> targets;
  double lambda_star = 1.0;
  int jobs = 1;
};

struct SweepPoint {
  std::size_t value = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  TrainLogRow last;
  std::string status = "ok";
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig base = a.flags.resolve();
  std::vector<std::string> problems = validation_errors(base);
  if (a.axis != "embedding_size" && a.axis != "n_bin") problems.push_back("--axis must be embedding_size or n_bin");
  if (a.train_path.empty()) problems.push_back("--train is required");
  if (a.out_dir.empty()) problems.push_back("--out is required");
  if (!(a.lambda_star > 0.0) || !std::isfinite(a.lambda_star)) problems.push_back("--lambda-star must be > 0");
  if (a.jobs < 1) problems.push_back("--jobs must be >= 1");

  std::vector<std::size_t> values;
  std::set<std::size_t> seen;
  for (std::size_t v : a.values) {
    if (seen.insert(v).second) values.push_back(v);
    else err << "warning: duplicate sweep value " << v << " ignored\n";
  }
  if (values.size() < 3) problems.push_back("sweep needs at least 3 distinct values");
  if (!problems.empty()) throw ValidationError(problems);

  const Dataset train = load_dataset(a.train_path, a.targets);
  std::optional<Dataset> test;
  if (!a.test_path.empty()) test = load_dataset(a.test_path, a.targets);

  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  write_json(dir / "config.json", {{"command", "sweep"},
                                   {"axis", a.axis},
                                   {"values", values},
                                   {"lambda_star", a.lambda_star},
                                   {"train", a.train_path},
                                   {"test", a.test_path},
                                   {"targets", a.targets},
                                   {"jobs", a.jobs},
                                   {"base_config", to_json(base)}});

  // Both lambda arms of one axis value share that value's seed.
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (double lambda : {0.0, a.lambda_star})
      points.push_back({values[i], lambda, splitmix64(base.seed ^ (i + 1)), {}, "ok"});

  const auto n_points = static_cast<long>(points.size());
#pragma omp parallel for schedule(dynamic) num_threads(a.jobs)
  for (long p = 0; p < n_points; ++p) {
    SweepPoint& pt = points[static_cast<std::size_t>(p)];
    TrainConfig cfg = base;
    cfg.lambda = pt.lambda;
    cfg.seed = pt.seed;
    if (a.axis == "embedding_size") cfg.embedding_size = pt.value;
    else cfg.n_bin = pt.value;
    try {
      pt.last = fit(cfg, train, test ? &*test : nullptr).log.back();
    } catch (const std::exception& e) {
      pt.status = std::string("failed: ") + e.what();
    }
  }

  std::ofstream csv(dir / "sweep.csv");
  if (!csv) throw std::runtime_error("cannot open '" + (dir / "sweep.csv").string() + "' for writing");
  csv << "axis,value,lambda,seed,train_mse,test_mse,smoothness_loss,status\n";
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  std::size_t failures = 0;
  for (const auto& pt : points) {
    const bool ok = pt.status == "ok";
    failures += ok ? 0 : 1;
    std::string status = pt.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    csv << a.axis << ',' << pt.value << ',' << format_double(pt.lambda) << ',' << pt.seed << ','
        << (ok ? num(pt.last.train_mse) : "") << ',' << (ok ? num(pt.last.test_mse) : "") << ','
        << (ok ? num(pt.last.smoothness_loss) : "") << ',' << status << '\n';
    if (!ok) err << "sweep point " << a.axis << '=' << pt.value << " lambda=" << pt.lambda << ' ' << pt.status << '\n';
  }
  out << "wrote " << points.size() << " sweep points (" << failures << " failed) to " << (dir / "sweep.csv").string()
      << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> models;
  std::string out_dir;
  std::size_t resolution = 201;
};

nlohmann::json metrics_json(const MetricsReport& r) {
  nlohmann::json j = {{"non_linearity", r.non_linearity},
                      {"non_monotonicity", r.non_monotonicity},
                      {"smoothness", r.smoothness},
                      {"smoothness_raw", r.smoothness_raw}};
  j["diversity"] = r.diversity ? nlohmann::json(*r.diversity) : nlohmann::json(nullptr);
  return j;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> problems;
  if (a.models.empty()) problems.push_back("at least one model file is required");
  if (a.out_dir.empty()) problems.push_back("--out is required");
  if (a.resolution < 2) problems.push_back("--resolution must be >= 2");
  if (!problems.empty()) throw ValidationError(problems);

  std::vector<Model> models;
  for (const auto& p : a.models) {
    models.push_back(load_model(p));
    if (!models.back().encoder) throw ValidationError({p + ": model has no positional encoder to analyze"});
  }
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  write_json(dir / "config.json",
             {{"command", "analyze"}, {"models", a.models}, {"resolution", a.resolution}});

  nlohmann::json summary = {{"models", nlohmann::json::array()}, {"similarity_errors", nlohmann::json::array()}};
  std::vector<EmbeddingSample> samples;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const EmbeddingTable& table = *models[k].encoder;
    samples.emplace_back(std::vector<EmbeddingTable>{table});
    const std::string tag = std::to_string(k);
    nlohmann::json entry = {{"index", k}, {"path", a.models[k]}, {"metrics", metrics_json(compute_metrics(samples.back()))}};
    write_table_csv(dir / ("table_" + tag + ".csv"), table, a.resolution);

    if (table.mode() == Interpolation::CubicHermite) {
      const auto prof = derivative_profile(table, a.resolution);
      std::ofstream pcsv(dir / ("profile_" + tag + ".csv"));
      pcsv << "x_hat";
      for (std::size_t j = 0; j < table.dim(); ++j) pcsv << ",g_hat_" << j;
      pcsv << '\n';
      for (std::size_t r = 0; r < prof.x_hat.size(); ++r) {
        pcsv << format_double(prof.x_hat[r]);
        for (std::size_t j = 0; j < table.dim(); ++j) pcsv << ',' << format_double(prof.normalized(r, j));
        pcsv << '\n';
      }
    } else {
      entry["profile"] = "skipped: linear interpolation";
    }

    if (table.dim() >= 2 && table.n_bin() >= 3) {
      const auto pca = pca2(table);
      std::ofstream ccsv(dir / ("pca_" + tag + ".csv"));
      ccsv << "bin,x_hat,p1,p2\n";
      for (std::size_t i = 0; i < pca.x_hat.size(); ++i)
        ccsv << (i + 1) << ',' << format_double(pca.x_hat[i]) << ',' << format_double(pca.scores(i, 0)) << ','
             << format_double(pca.scores(i, 1)) << '\n';
      entry["pca"] = {{"variance", pca.variance}, {"degenerate", pca.degenerate}};
    }
    write_json(dir / ("metrics_" + tag + ".json"), entry);
    summary["models"].push_back(entry);
  }

  if (models.size() >= 2) {
    const std::size_t m = models.size();
    std::vector<std::vector<std::optional<double>>> sim(m, std::vector<std::optional<double>>(m));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        try {
          sim[i][j] = sim[j][i] = task_similarity(samples[i], samples[j]);
        } catch (const std::invalid_argument& e) {
          summary["similarity_errors"].push_back({{"a", i}, {"b", j}, {"error", e.what()}});
          err << "similarity " << a.models[i] << " vs " << a.models[j] << ": " << e.what() << '\n';
        }
      }
    }
    std::ofstream scsv(dir / "similarity.csv");
    scsv << "model";
    for (std::size_t j = 0; j < m; ++j) scsv << ",m" << j;
    scsv << '\n';
    for (std::size_t i = 0; i < m; ++i) {
      scsv << 'm' << i;
      for (std::size_t j = 0; j < m; ++j) scsv << ',' << (sim[i][j] ? format_double(*sim[i][j]) : "NA");
      scsv << '\n';
    }
  }
  write_json(dir / "metrics.json", summary);
  out << "analyzed " << models.size() << " model(s) into " << dir.string() << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learnable spline positional encoding: data generation, training, sweeps and analysis", "posenc"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset (CSV + sidecar JSON)");
  gen_cmd->add_option("kind", gen.kind, "toy | lj | morse")->required();
  gen_cmd->add_option("--out", gen.out, "output CSV path")->required();
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--n", gen.n, "number of samples");
  gen_cmd->add_option("--noise", gen.noise, "toy: Gaussian noise sd");
  gen_cmd->add_option("--epsilon", gen.epsilon, "lj: well depth");
  gen_cmd->add_option("--sigma", gen.sigma, "lj: length scale");
  gen_cmd->add_option("--depth", gen.depth, "morse: D");
  gen_cmd->add_option("--width", gen.width, "morse: a");
  gen_cmd->add_option("--r0", gen.r0, "morse: equilibrium distance");
  gen_cmd->add_option("--rmin", gen.r_min);
  gen_cmd->add_option("--rmax", gen.r_max);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit one model; writes model.json, log.csv, config.json");
  train.flags.attach(train_cmd);
  train_cmd->add_option("--train", train.train_path, "training CSV");
  train_cmd->add_option("--test", train.test_path, "test CSV");
  train_cmd->add_option("--targets", train.targets, "target columns to fit (default all)")->delimiter(',');
  train_cmd->add_option("--out", train.out_dir, "output directory");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "train across embedding sizes or bin counts, with and without smoothing");
  sweep.flags.attach(sweep_cmd);
  sweep_cmd->add_option("--axis", sweep.axis, "embedding_size | n_bin")->required();
  sweep_cmd->add_option("--values", sweep.values, "axis values")->delimiter(',')->required();
  sweep_cmd->add_option("--lambda-star", sweep.lambda_star, "smoothness weight of the regularized arm");
  sweep_cmd->add_option("--train", sweep.train_path, "training CSV");
  sweep_cmd->add_option("--test", sweep.test_path, "test CSV");
  sweep_cmd->add_option("--targets", sweep.targets, "target columns to fit (default all)")->delimiter(',');
  sweep_cmd->add_option("--jobs", sweep.jobs, "sweep points trained concurrently");
  sweep_cmd->add_option("--out", sweep.out_dir, "output directory");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "embedding metrics, derivative profiles, PCA and similarity");
  analyze_cmd->add_option("models", analyze.models, "model JSON files")->required();
  analyze_cmd->add_option("--out", analyze.out_dir, "output directory");
  analyze_cmd->add_option("--resolution", analyze.resolution, "sample points for profiles and table CSVs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out, err);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze, out, err);
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) err << "error: " << p << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}

}  // namespace posenc::cli
