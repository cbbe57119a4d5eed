#include "commands.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "manifest.hpp"
#include "mmcirt/bitscale.hpp"
#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"
#include "mmcirt/evaluation.hpp"
#include "mmcirt/mml.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/simulation.hpp"
#include "mmcirt/stats.hpp"
#include "mmcirt/training.hpp"
#include "mmcirt/version.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace mmcirt::cli {

namespace {

struct Options {
  std::string data, key, fitted, config, grid, manifest;
  std::string out = "out";
  std::string model = "nr";
  std::string fitter = "ae";
  std::string score;
  std::string theta0 = "guessing";
  std::string axis = "theta";
  std::string lengths = "20";
  std::string sizes = "1000";
  double lr = 0.04;
  std::size_t batch = 128, layers = 1, epochs = 200, patience = 20;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t groups = 10, folds = 5, grid_size = 1001, points = 201;
  std::size_t items = 20, persons = 1000, replications = 20, population = 6000;
  int options = 4;
  double missing_rate = 0.0;
  bool missing = false, svg = false;
  unsigned threads = 1;
};

struct Flags {
  CLI::Option* lr = nullptr;
  CLI::Option* batch = nullptr;
  CLI::Option* layers = nullptr;
  CLI::Option* epochs = nullptr;
  CLI::Option* patience = nullptr;
  CLI::Option* val_fraction = nullptr;
  CLI::Option* score = nullptr;
};

// Output directory plus the list of files written, for the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail_data("IO_ERROR", "cannot create output directory '" + dir_.string() + "': " + ec.message());
  }
  fs::path add(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }
  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(part, &pos);
      if (pos != part.size()) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      fail_config(std::string("bad ") + what + " list '" + text + "'");
    }
  }
  if (out.empty()) fail_config(std::string("empty ") + what + " list");
  return out;
}

Hyperparams hyperparams(const Options& o, const Flags& f) {
  Hyperparams hp;
  if (!o.config.empty()) {
    std::ifstream in(o.config, std::ios::binary);
    if (!in) fail_data("IO_ERROR", "cannot open config '" + o.config + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail_config(std::string("cannot parse config: ") + e.what());
    }
    hp = hyperparams_from_json(j, hp);
  }
  if (*f.lr) hp.learning_rate = o.lr;
  if (*f.batch) hp.batch_size = o.batch;
  if (*f.layers) hp.hidden_layers = o.layers;
  if (*f.epochs) hp.epochs = o.epochs;
  if (*f.patience) hp.patience = o.patience;
  if (*f.val_fraction) hp.validation_fraction = o.val_fraction;
  hp.seed = o.seed;
  validate(hp);
  return hp;
}

ResponseMatrix load_keyed(const Options& o) {
  if (o.data.empty()) fail_config("--data is required");
  if (o.key.empty()) fail_config("--key is required");
  return load_csv(o.data, CsvSchema{load_key(o.key), o.missing});
}

ResponseMatrix load_for_model(const Options& o, const IrtModel& model) {
  if (o.data.empty()) fail_config("--data is required");
  CsvSchema schema;
  schema.missing_as_category = model.missing_as_category();
  for (const auto& item : model.items()) schema.key.push_back({item.id, item.correct, item.options});
  auto rm = load_csv(o.data, schema);
  model.check_compatible(rm);
  return rm;
}

FittedModel load_model(const Options& o) {
  if (o.fitted.empty()) fail_config("--fitted is required");
  return load_fitted(o.fitted);
}

std::vector<ScoreMethod> requested_methods(const Options& o, const FittedModel& fitted) {
  if (!o.score.empty()) {
    const auto m = parse_score_method(o.score);
    if (m == ScoreMethod::nn && !fitted.has_encoder())
      fail_config("model fitted by '" + fitted.fitter() + "' has no encoder; use --score ml");
    return {m};
  }
  if (fitted.has_encoder()) return {ScoreMethod::nn, ScoreMethod::ml};
  return {ScoreMethod::ml};
}

ScoreMethod single_method(const Options& o) { return o.score.empty() ? ScoreMethod::ml : parse_score_method(o.score); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  return out;
}

void cmd_generate(const Options& o, Outputs& out) {
  auto spec = synthetic_spec(o.items, o.options, derive_seed(o.seed, {1}));
  spec.missing_rate = o.missing_rate;
  const auto data = generate(spec, o.persons, derive_seed(o.seed, {2}));
  write_csv(data.responses, out.add("responses.csv"));
  write_key(data.responses, out.add("key.csv"));
  write_true_theta(data, out.add("true_theta.csv"));
}

void cmd_fit(const Options& o, const Flags& f, Outputs& out) {
  const Variant variant = parse_variant(o.model);
  if (o.fitter != "ae" && o.fitter != "mml") fail_config("unknown fitter '" + o.fitter + "' (expected ae or mml)");
  const auto hp = hyperparams(o, f);
  const auto rm = load_keyed(o);
  if (o.fitter == "mml") {
    if (variant != Variant::nr) fail_config("MML fitting is only available for the nr model");
    MmlOptions mo;
    mo.threads = o.threads;
    const auto result = mml_fit_nr(rm, mo);
    if (!result.trace.converged)
      std::cerr << "warning: MML did not converge in " << result.trace.iterations << " iterations\n";
    save_fitted(result.fitted, out.add("model.json"));
    auto trace = open_out(out.add("mml_trace.csv"));
    csv::write_row(trace, {"iteration", "marginal_loglik"});
    for (std::size_t i = 0; i < result.trace.marginal_loglik.size(); ++i)
      csv::write_row(trace, {std::to_string(i), csv::format_double(result.trace.marginal_loglik[i])});
    return;
  }
  const auto fitted = fit(variant, rm, hp);
  save_fitted(fitted, out.add("model.json"));
  write_training_log(fitted.log(), out.add("training_log.csv"));
}

void cmd_score(const Options& o, Outputs& out) {
  const auto fitted = load_model(o);
  const auto rm = load_for_model(o, fitted.model());
  std::vector<ThetaEstimates> est;
  for (auto m : requested_methods(o, fitted)) est.push_back(score(fitted, rm, m, o.threads));
  write_scores(rm, est, out.add("scores.csv"));
}

double theta0_for(const Options& o, const IrtModel& model) {
  return resolve_theta0(model, parse_theta0_mode(o.theta0), derive_seed(o.seed, {3}), o.threads);
}

void cmd_bit(const Options& o, Outputs& out) {
  const auto fitted = load_model(o);
  const auto& model = fitted.model();
  const auto rm = load_for_model(o, model);
  const auto method = single_method(o);
  const double theta0 = theta0_for(o, model);
  const auto table = build_bitscale(model, theta0, o.grid_size);
  write_bitscale(table, model, out.add("bit_table.csv"));

  const auto est = score(fitted, rm, method, o.threads);
  auto s = open_out(out.add("bit_scores.csv"));
  std::vector<std::string> cells{"person", "theta"};
  for (const auto& item : model.items()) cells.push_back("B_" + item.id);
  cells.push_back("B");
  csv::write_row(s, cells);
  for (std::size_t i = 0; i < rm.n_persons(); ++i) {
    const auto b = bit_score(table, est.theta[i]);
    cells = {rm.person_id(i), csv::format_double(est.theta[i])};
    for (double v : b.items) cells.push_back(csv::format_double(v));
    cells.push_back(csv::format_double(b.total));
    csv::write_row(s, cells);
  }
  auto j = open_out(out.add("bitscale.json"));
  j << nlohmann::json{{"theta0", theta0},
                      {"theta0_mode", o.theta0},
                      {"score", std::string(to_string(method))},
                      {"grid_points", table.theta.size()},
                      {"max_bits", table.total.back()}}
           .dump(2)
    << '\n';
}

void cmd_eval(const Options& o, Outputs& out) {
  const auto fitted = load_model(o);
  const auto& model = fitted.model();
  const auto rm = load_for_model(o, model);
  const auto method = single_method(o);
  const auto est = score(fitted, rm, method, o.threads);
  const auto report = evaluate(model, rm, est, o.groups);
  auto j = report_to_json(report, model);
  j["variant"] = std::string(to_string(model.variant()));
  j["fitter"] = fitted.fitter();
  j["groups"] = o.groups;
  auto rep = open_out(out.add("report.json"));
  rep << j.dump(2) << '\n';
  write_grouped_residuals(report.grouped, model, out.add("grouped_residuals.csv"));
  write_response_residuals(rm, per_response_residuals(model, rm, est.theta), out.add("response_residuals.csv"));
}

void cmd_cv(const Options& o, const Flags& f, Outputs& out) {
  const Variant variant = parse_variant(o.model);
  const auto hp = hyperparams(o, f);
  const auto rm = load_keyed(o);
  std::vector<CvPoint> grid;
  if (o.grid.empty()) {
    grid = default_cv_grid(variant);
  } else {
    std::ifstream in(o.grid, std::ios::binary);
    if (!in) fail_data("IO_ERROR", "cannot open grid '" + o.grid + "'");
    try {
      const auto j = nlohmann::json::parse(in);
      for (const auto& p : j)
        grid.push_back({p.at("lr").get<double>(), p.at("batch").get<std::size_t>(),
                        p.value("layers", std::size_t{1})});
    } catch (const nlohmann::json::exception& e) {
      fail_config(std::string("cannot parse grid: ") + e.what());
    }
  }
  const auto results = cross_validate(variant, rm, grid, hp, o.folds, o.seed, o.threads);
  write_cv_results(results, out.add("cv_results.csv"));
}

void cmd_simulate(const Options& o, const Flags& f, Outputs& out) {
  SimConfig cfg;
  cfg.lengths = parse_list(o.lengths, "length");
  cfg.sample_sizes = parse_list(o.sizes, "sample size");
  cfg.replications = o.replications;
  cfg.population = o.population;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  if (!o.data.empty()) {
    cfg.source = load_keyed(o);
  } else {
    cfg.generator = synthetic_spec(o.items, o.options, derive_seed(o.seed, {1}));
  }
  for (auto& m : cfg.models) {
    if (*f.lr) m.hp.learning_rate = o.lr;
    if (*f.batch) m.hp.batch_size = o.batch;
    if (*f.layers) m.hp.hidden_layers = o.layers;
    if (*f.epochs) m.hp.epochs = o.epochs;
    if (*f.patience) m.hp.patience = o.patience;
    if (*f.val_fraction) m.hp.validation_fraction = o.val_fraction;
  }
  const auto result = run_simulation(cfg);
  write_sim_result(result, out.add("sim_results.csv"));
  auto reps = open_out(out.add("sim_replicates.csv"));
  csv::write_row(reps, {"n", "items", "replication", "model", "failed", "loglik_ml", "loglik_nn", "resid_ml",
                        "resid_nn", "error"});
  const auto fmt = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); };
  for (const auto& r : result.replicates)
    csv::write_row(reps, {std::to_string(r.sample_size), std::to_string(r.length), std::to_string(r.replication),
                          cfg.models[r.model].name, r.failed ? "1" : "0", r.failed ? "" : fmt(r.loglik_ml),
                          r.failed ? "" : fmt(r.loglik_nn), r.failed ? "" : fmt(r.resid_ml),
                          r.failed ? "" : fmt(r.resid_nn), safe_name(r.error)});
}

void cmd_export_irf(const Options& o, Outputs& out) {
  const auto fitted = load_model(o);
  const auto& model = fitted.model();
  if (o.axis != "theta" && o.axis != "bit") fail_config("unknown axis '" + o.axis + "' (expected theta or bit)");
  if (o.points < 2) fail_config("--points must be at least 2");
  const bool bits = o.axis == "bit";
  const auto grid = linspace(model.bounds().lo, model.bounds().hi, o.points);
  std::optional<BitScaleTable> table;
  if (bits) table = build_bitscale(model, theta0_for(o, model), o.grid_size);
  const auto axis_of = [&](double t) { return bits ? bit_score(*table, t).total : t; };

  std::vector<std::vector<Curve>> curves(model.n_items());
  for (std::size_t j = 0; j < model.n_items(); ++j) {
    const int M = model.categories(j);
    for (int m = 0; m < M; ++m) {
      Curve c;
      c.label = m == model.options(j) ? "missing" : "option " + std::to_string(m) +
                                                       (m == model.correct_option(j) ? " (key)" : "");
      curves[j].push_back(std::move(c));
    }
    auto f = open_out(out.add("irf_" + safe_name(model.items()[j].id) + ".csv"));
    std::vector<std::string> cells{bits ? "bits" : "theta"};
    if (bits) cells.push_back("theta");
    for (int m = 0; m < M; ++m) cells.push_back(m == model.options(j) ? "p_missing" : "p_" + std::to_string(m));
    csv::write_row(f, cells);
    for (double t : grid) {
      const auto p = model.probs(j, t);
      const double x = axis_of(t);
      cells = {csv::format_double(x)};
      if (bits) cells.push_back(csv::format_double(t));
      for (int m = 0; m < M; ++m) {
        cells.push_back(csv::format_double(p[static_cast<std::size_t>(m)]));
        curves[j][static_cast<std::size_t>(m)].x.push_back(x);
        curves[j][static_cast<std::size_t>(m)].y.push_back(p[static_cast<std::size_t>(m)]);
      }
      csv::write_row(f, cells);
    }
  }

  if (!o.data.empty()) {
    const auto rm = load_for_model(o, model);
    const auto est = score(fitted, rm, single_method(o), o.threads);
    const auto grouped = grouped_residuals(model, rm, est.theta, o.groups);
    const auto members = theta_groups(est.theta, o.groups);
    std::vector<double> centre(o.groups);
    for (std::size_t g = 0; g < o.groups; ++g) {
      double s = 0.0;
      for (auto i : members[g]) s += axis_of(est.theta[i]);
      centre[g] = s / static_cast<double>(members[g].size());
    }
    auto f = open_out(out.add("groups.csv"));
    csv::write_row(f, {"group", "item", "option", bits ? "bits" : "theta", "P", "p"});
    for (const auto& c : grouped.cells) {
      csv::write_row(f, {std::to_string(c.group), model.items()[c.item].id, std::to_string(c.category),
                         csv::format_double(centre[c.group]), csv::format_double(c.observed),
                         csv::format_double(c.expected)});
      auto& curve = curves[c.item][static_cast<std::size_t>(c.category)];
      curve.dot_x.push_back(centre[c.group]);
      curve.dot_y.push_back(c.observed);
    }
  }
  if (o.svg)
    for (std::size_t j = 0; j < model.n_items(); ++j)
      write_curve_svg(out.add("irf_" + safe_name(model.items()[j].id) + ".svg"), model.items()[j].id,
                      bits ? "bits" : "theta", curves[j]);
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 4;
}

void report(const std::string& code, const std::string& message) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "error: " << code << ": " << line << '\n';
}

int dispatch(std::vector<std::string> args, int depth);

int replay(const std::string& manifest_path, const std::string& out_override, int depth) {
  if (depth > 0) fail_config("a replayed manifest cannot itself be a replay");
  auto m = read_manifest(manifest_path);
  auto args = m.argv;
  if (!out_override.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--out" && i + 1 < args.size()) {
        args[i + 1] = out_override;
        replaced = true;
      } else if (args[i].rfind("--out=", 0) == 0) {
        args[i] = "--out=" + out_override;
        replaced = true;
      }
    }
    if (!replaced) {
      args.push_back("--out");
      args.push_back(out_override);
    }
  }
  return dispatch(std::move(args), depth + 1);
}

int dispatch(std::vector<std::string> args, int depth) {
  Options o;
  Flags fit_flags, cv_flags, sim_flags;
  CLI::App app{"Nominal response and monotone multiple choice IRT models fitted with autoencoders", "mmc-irt"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  std::string out_override;

  const auto common = [&](CLI::App* s) {
    s->add_option("--out", o.out, "Output directory")->capture_default_str();
    s->add_option("--seed", o.seed, "Random seed (falls back to MMC_IRT_SEED)");
    s->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->capture_default_str();
  };
  const auto training = [&](CLI::App* s, Flags& f) {
    f.lr = s->add_option("--lr", o.lr, "Learning rate");
    f.batch = s->add_option("--batch", o.batch, "Mini-batch size");
    f.layers = s->add_option("--layers", o.layers, "Monotone layers per MMC subnet");
    f.epochs = s->add_option("--epochs", o.epochs, "Epoch budget");
    f.patience = s->add_option("--patience", o.patience, "Early-stopping patience in epochs");
    f.val_fraction = s->add_option("--val-fraction", o.val_fraction, "Internal validation share");
    s->add_option("--config", o.config, "Hyperparameter JSON");
  };
  const auto keyed = [&](CLI::App* s) {
    s->add_option("--data", o.data, "Response CSV");
    s->add_option("--key", o.key, "Answer key CSV (item,correct[,options])");
    s->add_flag("--missing", o.missing, "Model missing responses as an extra category");
  };
  const auto fitted = [&](CLI::App* s) {
    s->add_option("--fitted", o.fitted, "Fitted model JSON")->required();
    s->add_option("--data", o.data, "Response CSV");
  };

  auto* gen = app.add_subcommand("generate", "Synthetic responses from the non-logistic generator");
  common(gen);
  gen->add_option("--items", o.items)->capture_default_str();
  gen->add_option("--options", o.options)->capture_default_str();
  gen->add_option("--persons", o.persons)->capture_default_str();
  gen->add_option("--missing-rate", o.missing_rate)->capture_default_str();

  auto* fit_cmd = app.add_subcommand("fit", "Fit an IRT model");
  common(fit_cmd);
  keyed(fit_cmd);
  training(fit_cmd, fit_flags);
  fit_cmd->add_option("--model", o.model, "nr or mmc")->capture_default_str();
  fit_cmd->add_option("--fitter", o.fitter, "ae or mml")->capture_default_str();

  auto* score_cmd = app.add_subcommand("score", "Latent trait scores");
  common(score_cmd);
  fitted(score_cmd);
  score_cmd->add_option("--score", o.score, "nn or ml (default: all available)");

  auto* bit_cmd = app.add_subcommand("bit", "Bit-scale table and bit scores");
  common(bit_cmd);
  fitted(bit_cmd);
  bit_cmd->add_option("--score", o.score, "nn or ml")->default_str("ml");
  bit_cmd->add_option("--theta0", o.theta0, "guessing or lower")->capture_default_str();
  bit_cmd->add_option("--grid-size", o.grid_size)->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Held-out log-likelihood and residuals");
  common(eval_cmd);
  fitted(eval_cmd);
  eval_cmd->add_option("--score", o.score, "nn or ml")->default_str("ml");
  eval_cmd->add_option("--groups", o.groups)->capture_default_str();

  auto* cv_cmd = app.add_subcommand("cv", "k-fold hyperparameter search");
  common(cv_cmd);
  keyed(cv_cmd);
  training(cv_cmd, cv_flags);
  cv_cmd->add_option("--model", o.model, "nr or mmc")->capture_default_str();
  cv_cmd->add_option("--folds", o.folds)->capture_default_str();
  cv_cmd->add_option("--grid", o.grid, "Grid JSON: [{\"lr\":..,\"batch\":..,\"layers\":..}]");

  auto* sim_cmd = app.add_subcommand("simulate", "Resampling comparison of MMC-AE, NR-AE and NR-MML");
  common(sim_cmd);
  keyed(sim_cmd);
  training(sim_cmd, sim_flags);
  sim_cmd->add_option("--lengths", o.lengths, "Comma-separated test lengths")->capture_default_str();
  sim_cmd->add_option("--sizes", o.sizes, "Comma-separated sample sizes")->capture_default_str();
  sim_cmd->add_option("--replications", o.replications)->capture_default_str();
  sim_cmd->add_option("--population", o.population, "Synthetic population size")->capture_default_str();
  sim_cmd->add_option("--items", o.items, "Synthetic item count")->capture_default_str();
  sim_cmd->add_option("--options", o.options)->capture_default_str();

  auto* irf_cmd = app.add_subcommand("export-irf", "Item response curves as CSV and SVG");
  common(irf_cmd);
  fitted(irf_cmd);
  irf_cmd->add_option("--axis", o.axis, "theta or bit")->capture_default_str();
  irf_cmd->add_option("--points", o.points)->capture_default_str();
  irf_cmd->add_option("--score", o.score, "nn or ml")->default_str("ml");
  irf_cmd->add_option("--groups", o.groups)->capture_default_str();
  irf_cmd->add_option("--theta0", o.theta0, "guessing or lower")->capture_default_str();
  irf_cmd->add_option("--grid-size", o.grid_size)->capture_default_str();
  irf_cmd->add_flag("--svg", o.svg, "Also write SVG plots");

  auto* replay_cmd = app.add_subcommand("replay", "Rerun a manifest");
  replay_cmd->add_option("--manifest", o.manifest)->required();
  replay_cmd->add_option("--out", out_override, "Override the output directory");

  const std::vector<std::string> original = args;
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("CONFIG_INVALID", e.what());
    return 2;
  }

  if (replay_cmd->parsed()) return replay(o.manifest, out_override, depth);

  CLI::App* sub = app.get_subcommands().front();
  std::vector<std::string> resolved = original;
  if (!sub->get_option("--seed")->count()) {
    if (const char* env = std::getenv("MMC_IRT_SEED")) {
      try {
        std::size_t pos = 0;
        o.seed = std::stoull(env, &pos);
        if (pos != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        fail_config(std::string("MMC_IRT_SEED is not an unsigned integer: '") + env + "'");
      }
    }
    resolved.push_back("--seed");
    resolved.push_back(std::to_string(o.seed));
  }

  Outputs out(o.out);
  const std::string name = sub->get_name();
  if (name == "generate") cmd_generate(o, out);
  else if (name == "fit") cmd_fit(o, fit_flags, out);
  else if (name == "score") cmd_score(o, out);
  else if (name == "bit") cmd_bit(o, out);
  else if (name == "eval") cmd_eval(o, out);
  else if (name == "cv") cmd_cv(o, cv_flags, out);
  else if (name == "simulate") cmd_simulate(o, sim_flags, out);
  else if (name == "export-irf") cmd_export_irf(o, out);

  write_manifest({name, resolved, o.seed, out.names()}, out.dir());
  return 0;
}

}  // namespace

int run(std::vector<std::string> args) {
  try {
    return dispatch(std::move(args), 0);
  } catch (const Error& e) {
    report(e.code(), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    report("IO_ERROR", e.what());
    return 3;
  } catch (const std::exception& e) {
    report("INTERNAL", e.what());
    return 1;
  }
}

}  // namespace mmcirt::cli
