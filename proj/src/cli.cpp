#include "optforecast/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "optforecast/binomial.hpp"
#include "optforecast/error.hpp"
#include "optforecast/fusion.hpp"
#include "optforecast/lstm.hpp"
#include "optforecast/market_data.hpp"
#include "optforecast/qrm.hpp"
#include "optforecast/rng.hpp"
#include "optforecast/trading.hpp"

namespace optforecast::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using market_data::QuoteRecord;

namespace {

constexpr int kManifestSchema = 1;

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Reads a `date,...` CSV and returns the named column aligned to `records`
/// by date. Dates absent from the file yield empty entries.
std::vector<std::optional<double>> read_signal_column(const fs::path& path,
                                                      std::span<const QuoteRecord> records,
                                                      std::initializer_list<std::string_view> names) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
    break;
  }
  if (header.empty() || header[0] != "date")
    throw ValidationError(path.string() + ": expected a header starting with 'date'");
  std::size_t col = 0;
  for (auto name : names) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end()) {
      col = static_cast<std::size_t>(it - header.begin());
      break;
    }
  }
  if (col == 0) throw ValidationError(path.string() + ": no signal column found");

  std::map<std::int32_t, double> by_date;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != header.size())
      throw ValidationError(path.string() + ": row " + std::to_string(row) + " has " +
                                std::to_string(cells.size()) + " columns",
                            row);
    const auto date = market_data::Date::parse(cells[0]);
    const std::string& v = cells[col];
    if (v.empty()) continue;
    double value = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ValidationError(path.string() + ": row " + std::to_string(row) + ": bad number '" + v + "'",
                            row);
    by_date[date.days] = value;
  }
  std::vector<std::optional<double>> out(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto it = by_date.find(records[k].date.days);
    if (it != by_date.end()) out[k] = it->second;
  }
  return out;
}

void print_summary(std::ostream& out, const json& summary, const std::string& format) {
  if (format == "csv") {
    out << "key,value\n";
    for (const auto& [k, v] : summary.items()) out << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  } else {
    out << summary.dump(1) << '\n';
  }
}

/// Replaces `--config FILE` with `--key=value` tokens for every `key = value`
/// line whose key was not given on the command line. Unknown keys then fail
/// as unknown options.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string file;
    if (args[i] == "--config" && i + 1 < args.size())
      file = args[++i];
    else if (args[i].rfind("--config=", 0) == 0)
      file = args[i].substr(9);
    else {
      out.push_back(args[i]);
      continue;
    }
    std::istringstream lines(read_file(file));
    int row = 0;
    for (std::string line; std::getline(lines, line);) {
      ++row;
      auto trim = [](std::string t) {
        const auto b = t.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        return t.substr(b, t.find_last_not_of(" \t\r") - b + 1);
      };
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw UsageError(file + ": line " + std::to_string(row) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      from_file.push_back("--" + key + "=" + value);
    }
  }
  for (const auto& token : from_file) {
    const std::string key = token.substr(0, token.find('='));
    const bool given = std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == key || a.rfind(key + "=", 0) == 0;
    });
    if (!given) out.push_back(token);
  }
  return out;
}

/// Resolved option values of a subcommand, keyed by long name.
json resolved_config(const CLI::App& sub) {
  json config = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      value = results.empty() ? std::string{} : results.front();
    } else {
      value = opt->get_default_str();
    }
    if (value.empty()) continue;
    config[name] = value;
  }
  return config;
}

void write_manifest(const fs::path& out_dir, const CLI::App& sub, const json& config,
                    const std::vector<std::string>& artifacts) {
  json m;
  m["schema"] = kManifestSchema;
  m["command"] = sub.get_name();
  m["config"] = config;
  m["seed"] = config.contains("seed") ? config["seed"] : json("0");
  m["rng"] = kRngId;
  json hashes = json::object();
  for (const auto& a : artifacts) hashes[a] = sha256_file(out_dir / a);
  m["artifacts"] = hashes;
  write_file(out_dir / (sub.get_name() + ".manifest.json"), m.dump(1) + "\n");
}

struct Common {
  std::string out_dir = ".";
  std::string format = "json";
};

/// Real-valued option whose recorded default round-trips exactly.
CLI::Option* add_real(CLI::App* sub, const std::string& name, double& value, const std::string& desc) {
  return sub->add_option(name, value, desc)->default_str(num(value));
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out-dir", c.out_dir, "Directory for outputs and the run manifest");
  sub->add_option("--format", c.format, "Summary format on stdout")
      ->check(CLI::IsMember({"json", "csv"}));
  // Consumed by expand_config before parsing; declared so it shows in --help.
  sub->add_option("--config", "Key-value config file (flags take precedence)");
}

// --- synth -----------------------------------------------------------------

struct SynthOptions {
  Common common;
  market_data::SyntheticSpec spec;
  double strike = 0;  // 0 -> s0
  std::string out = "synth.csv";
};

std::vector<std::string> run_synth(const SynthOptions& o, json& summary) {
  market_data::SyntheticSpec spec = o.spec;
  if (o.strike > 0) spec.strike = o.strike;
  const auto records = market_data::generate_gbm(spec);
  const fs::path dir(o.common.out_dir);
  market_data::write_csv(dir / o.out, records, market_data::synthetic_comment(spec));
  summary["rows"] = records.size();
  summary["first_stock_mid"] = records.front().stock_mid();
  summary["last_stock_mid"] = records.back().stock_mid();
  summary["generator"] = kRngId;
  return {o.out};
}

// --- qrm -------------------------------------------------------------------

struct QrmOptions {
  Common common;
  std::string input;
  qrm::QrmConfig config;
  std::string out = "qrm.csv";
};

std::vector<std::string> run_qrm(const QrmOptions& o, json& summary) {
  const auto records = market_data::load_csv(o.input);
  const auto minimizers = qrm::estimate_series(records, o.config);
  std::string csv = "date,est,real0,residual\n";
  double err_sum = 0;
  std::size_t err_count = 0;
  double max_residual = 0;
  long iterations = 0;
  for (std::size_t k = 1; k < records.size(); ++k) {
    const auto& m = *minimizers[k];
    csv += records[k].date.to_string() + ',' + num(m.est) + ',' + num(records[k].option_ask) + ',' +
           num(m.residual) + '\n';
    max_residual = std::max(max_residual, m.residual);
    iterations += m.iterations;
    if (k + 1 < records.size()) {
      const double next = records[k + 1].option_mid();
      if (next > 0) {
        err_sum += std::abs(m.est - next) / next;
        ++err_count;
      }
    }
  }
  write_file(fs::path(o.common.out_dir) / o.out, csv);
  summary["estimates"] = records.size() - 1;
  summary["mean_relative_error_next_mid"] = err_count ? err_sum / static_cast<double>(err_count) : 0.0;
  summary["max_pde_residual"] = max_residual;
  summary["mean_cg_iterations"] = static_cast<double>(iterations) / static_cast<double>(records.size() - 1);
  summary["last_minimizer"] = json::parse(qrm::to_json(*minimizers.back()));
  return {o.out};
}

// --- train -----------------------------------------------------------------

struct TrainOptions {
  Common common;
  std::string input;
  std::string qrm_csv;
  qrm::QrmConfig qrm_config;
  lstm::TrainConfig config;
  std::string optimizer = "sgd";
};

std::string metrics_json_fields(const lstm::Metrics& m) {
  return num(m.accuracy) + ',' + num(m.precision) + ',' + num(m.recall);
}

std::vector<std::string> run_train(TrainOptions o, json& summary) {
  o.config.optimizer = o.optimizer == "adam" ? lstm::Optimizer::adam : lstm::Optimizer::sgd;
  o.config.validation_fraction = 1.0 - o.config.train_fraction;
  const auto records = market_data::load_csv(o.input);
  std::vector<std::optional<double>> estimates;
  if (!o.qrm_csv.empty())
    estimates = read_signal_column(o.qrm_csv, records, {"est"});
  else
    estimates = qrm::estimates_of(qrm::estimate_series(records, o.qrm_config));
  const auto dataset = market_data::build_sequences(records, estimates, o.config.train_fraction);
  if (dataset.samples.empty()) throw ValidationError("train: no sequence samples in input");

  const auto result = lstm::train(dataset.samples, o.config);
  const fs::path dir(o.common.out_dir);
  write_file(dir / "model.json", lstm::checkpoint_json(result.params, o.config, result.best_epoch) + "\n");

  std::string history = "epoch,train_loss,train_accuracy,val_accuracy,val_precision,val_recall\n";
  for (const auto& e : result.history)
    history += std::to_string(e.epoch) + ',' + num(e.train_loss) + ',' + num(e.train.accuracy) + ',' +
               metrics_json_fields(e.validation) + '\n';
  write_file(dir / "train_history.csv", history);

  std::string predictions = "date,probability\n";
  for (const auto& s : dataset.samples)
    predictions += records[s.end_day].date.to_string() + ',' + num(lstm::predict(result.params, s)) + '\n';
  write_file(dir / "predictions.csv", predictions);

  const auto& best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
  summary["samples"] = dataset.samples.size();
  summary["train_samples"] = result.train_count;
  summary["validation_samples"] = result.validation_count;
  summary["best_epoch"] = result.best_epoch;
  summary["validation_accuracy"] = best.validation.accuracy;
  summary["validation_precision"] = best.validation.precision;
  summary["validation_recall"] = best.validation.recall;
  return {"model.json", "train_history.csv", "predictions.csv"};
}

// --- backtest --------------------------------------------------------------

struct BacktestOptions {
  Common common;
  std::string input;
  std::string signals;
  std::string mode = "qrm";
};

std::vector<std::string> run_backtest(const BacktestOptions& o, json& summary) {
  const auto records = market_data::load_csv(o.input);
  const bool classifier = o.mode == "classifier";
  const auto signals = read_signal_column(
      o.signals, records, classifier ? std::initializer_list<std::string_view>{"probability"}
                                     : std::initializer_list<std::string_view>{"est"});
  const auto result = trading::backtest(
      records, signals, classifier ? trading::SignalMode::classifier : trading::SignalMode::qrm);
  const fs::path dir(o.common.out_dir);
  trading::emit_plot_data(result, dir / "backtest.csv");
  write_file(dir / "backtest.json", result.summary_json() + "\n");
  summary = json::parse(result.summary_json());
  return {"backtest.csv", "backtest.json"};
}

// --- fuse ------------------------------------------------------------------

struct FuseOptions {
  Common common;
  double p1 = 0;
  double p2 = 0;
  bool published = false;
  std::string input;
};

std::vector<std::string> run_fuse(const FuseOptions& o, json& summary) {
  json report = json::object();
  if (o.p1 != 0 || o.p2 != 0) report["joint_precision"] = fusion::joint_precision(o.p1, o.p2);
  if (o.published) {
    json table = json::array();
    std::vector<double> ps;
    for (const auto& m : fusion::kPublishedPrecisions) {
      table.push_back({{"name", m.name}, {"precision", m.precision}});
      ps.push_back(m.precision);
    }
    report["published"] = table;
    report["published_joint_if_independent"] = fusion::joint_precision(ps);
  }
  if (!o.input.empty()) {
    const std::string text = read_file(o.input);
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    if (std::getline(in, line)) {
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
    }
    if (header.size() < 3 || header[0] != "truth")
      throw ValidationError(o.input + ": expected header truth,<model>,<model>[,...]");
    std::vector<fusion::ModelReport> models(header.size() - 1);
    for (std::size_t m = 0; m < models.size(); ++m) models[m].name = header[m + 1];
    std::vector<int> truth;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++row;
      std::vector<int> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) {
        if (cell != "0" && cell != "1")
          throw ValidationError(o.input + ": row " + std::to_string(row) + ": expected 0/1", row);
        cells.push_back(cell == "1");
      }
      if (cells.size() != header.size())
        throw ValidationError(o.input + ": row " + std::to_string(row) + ": wrong column count", row);
      truth.push_back(cells[0]);
      for (std::size_t m = 0; m < models.size(); ++m) models[m].predictions.push_back(cells[m + 1]);
    }
    report["unanimous"] = json::parse(fusion::unanimous_combine(models, truth).to_json());
  }
  if (report.empty()) throw UsageError("fuse: give --p1/--p2, --published, or --input");
  write_file(fs::path(o.common.out_dir) / "fusion.json", report.dump(1) + "\n");
  summary = report;
  return {"fusion.json"};
}

// --- binomial --------------------------------------------------------------

struct BinomialOptions {
  Common common;
  binomial::BinomialSpec spec;
  double rol = 0;            // 0 -> 1 / ror
  double expected_days = 0;  // 0 -> days (or 1 when days == 0)
};

std::vector<std::string> run_binomial(const BinomialOptions& o, json& summary) {
  binomial::BinomialSpec spec = o.spec;
  spec.rol = o.rol > 0 ? o.rol : 1.0 / spec.ror;
  const double horizon = o.expected_days > 0 ? o.expected_days : std::max(1, spec.days);
  const fs::path dir(o.common.out_dir);
  std::vector<std::string> artifacts{"binomial.json"};
  json s = json::parse(binomial::summary_json(spec, horizon));
  s["days"] = spec.days;
  s["rol"] = spec.rol;
  if (spec.days <= binomial::kMaxEnumerationDays) {
    write_file(dir / "binomial.csv", binomial::enumerate_tree(spec).to_csv());
    artifacts.push_back("binomial.csv");
  }
  write_file(dir / "binomial.json", s.dump(1) + "\n");
  summary = s;
  return artifacts;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return kUsage;
    case ErrorKind::numerical:
      return kNonConvergence;
    default:
      return kData;
  }
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw IoError("sha256 failed for " + path.string());
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Option forecasting toolkit: synthetic data, QRM, LSTM, fusion, backtests, binomial"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic GBM quote series");
  add_common(synth_cmd, synth.common);
  add_real(synth_cmd, "--s0", synth.spec.s0, "Initial stock price")->required();
  add_real(synth_cmd, "--sigma", synth.spec.sigma, "Volatility");
  add_real(synth_cmd, "--mu", synth.spec.mu, "Drift");
  add_real(synth_cmd, "--r", synth.spec.r, "Risk-free rate");
  synth_cmd->add_option("--days", synth.spec.n_days, "Trading days");
  synth_cmd->add_option("--seed", synth.spec.seed, "PRNG seed");
  add_real(synth_cmd, "--spread-bp", synth.spec.spread_bp, "Bid/ask spread in basis points");
  add_real(synth_cmd, "--strike", synth.strike, "Strike (0 = s0)");
  add_real(synth_cmd, "--maturity", synth.spec.maturity, "Fixed residual maturity in years");
  synth_cmd->add_flag("--exact-edges", synth.spec.exact_edges,
                        "Price option bid/ask at the stock bid/ask");
  synth_cmd->add_option("--out", synth.out, "Output file name inside --out-dir");

  QrmOptions qrm_opts;
  auto* qrm_cmd = app.add_subcommand("qrm", "Quasi-reversibility one-day-ahead estimates");
  add_common(qrm_cmd, qrm_opts.common);
  qrm_cmd->add_option("--input", qrm_opts.input, "Quote CSV")->required();
  qrm_cmd->add_option("--ns", qrm_opts.config.n_s, "Grid points in s (odd)");
  qrm_cmd->add_option("--nt", qrm_opts.config.n_tau, "Grid points in time (odd)");
  add_real(qrm_cmd, "--beta", qrm_opts.config.beta, "Regularization weight");
  add_real(qrm_cmd, "--horizon", qrm_opts.config.horizon, "Forecast horizon in years");
  add_real(qrm_cmd, "--cg-tol", qrm_opts.config.cg_tol, "CG relative residual tolerance");
  qrm_cmd->add_option("--cg-max-iter", qrm_opts.config.cg_max_iter, "CG iteration cap");
  qrm_cmd->add_option("--out", qrm_opts.out, "Output file name inside --out-dir");

  TrainOptions train_opts;
  train_opts.config.epochs = 20;
  auto* train_cmd = app.add_subcommand("train", "Train the LSTM direction classifier");
  add_common(train_cmd, train_opts.common);
  train_cmd->add_option("--input", train_opts.input, "Quote CSV")->required();
  train_cmd->add_option("--qrm", train_opts.qrm_csv, "QRM estimate CSV (computed when omitted)");
  train_cmd->add_option("--hidden", train_opts.config.hidden, "Hidden size");
  train_cmd->add_option("--batch", train_opts.config.batch, "Mini-batch size");
  train_cmd->add_option("--epochs", train_opts.config.epochs, "Epochs");
  add_real(train_cmd, "--lr", train_opts.config.learning_rate, "Learning rate");
  train_cmd->add_option("--seed", train_opts.config.seed, "PRNG seed");
  add_real(train_cmd, "--train-fraction", train_opts.config.train_fraction,
                        "Chronological training share (rest validates)");
  train_cmd->add_option("--optimizer", train_opts.optimizer, "sgd or adam")
      ->check(CLI::IsMember({"sgd", "adam"}));

  BacktestOptions bt;
  auto* bt_cmd = app.add_subcommand("backtest", "Threshold-strategy backtest");
  add_common(bt_cmd, bt.common);
  bt_cmd->add_option("--input", bt.input, "Quote CSV")->required();
  bt_cmd->add_option("--signals", bt.signals, "Signal CSV (qrm.csv or predictions.csv)")->required();
  bt_cmd->add_option("--mode", bt.mode, "qrm or classifier")->check(CLI::IsMember({"qrm", "classifier"}));

  FuseOptions fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Joint precision and unanimous-vote diagnostics");
  add_common(fuse_cmd, fuse.common);
  add_real(fuse_cmd, "--p1", fuse.p1, "Precision of model 1");
  add_real(fuse_cmd, "--p2", fuse.p2, "Precision of model 2");
  fuse_cmd->add_flag("--published", fuse.published, "Include the published model precisions");
  fuse_cmd->add_option("--input", fuse.input, "CSV truth,<model>,<model>... of 0/1 votes");

  BinomialOptions bin;
  auto* bin_cmd = app.add_subcommand("binomial", "Binomial wealth expectation");
  add_common(bin_cmd, bin.common);
  add_real(bin_cmd, "--p", bin.spec.p, "Up probability (model precision)");
  add_real(bin_cmd, "--ror", bin.spec.ror, "Up multiplier");
  add_real(bin_cmd, "--rol", bin.rol, "Down multiplier (0 = 1/ror)");
  bin_cmd->add_option("--days", bin.spec.days, "Trading days");
  add_real(bin_cmd, "--capital", bin.spec.capital, "Initial capital");
  add_real(bin_cmd, "--expected-days", bin.expected_days,
                      "Mean horizon for the Wald log-expectation (0 = days)");

  std::string manifest_path;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay_cmd->add_option("manifest", manifest_path, "Manifest JSON")->required();
  replay_cmd->add_option("--out-dir", replay_out, "Override the output directory");

  try {
    const auto expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }

  try {
    if (replay_cmd->parsed()) {
      json m;
      try {
        m = json::parse(read_file(manifest_path));
      } catch (const json::exception& e) {
        throw ValidationError(manifest_path + ": " + e.what());
      }
      if (!m.contains("schema") || m["schema"] != kManifestSchema)
        throw ValidationError(manifest_path + ": unsupported manifest schema");
      std::vector<std::string> replay_args{m.at("command").get<std::string>()};
      for (const auto& [key, value] : m.at("config").items()) {
        const std::string v =
            key == "out-dir" && !replay_out.empty() ? replay_out : value.get<std::string>();
        replay_args.push_back("--" + key + "=" + v);
      }
      if (!replay_out.empty() && !m.at("config").contains("out-dir"))
        replay_args.push_back("--out-dir=" + replay_out);
      return run(replay_args, out, err);
    }

    CLI::App* sub = app.get_subcommands().front();
    const Common& common = sub == synth_cmd ? synth.common
                           : sub == qrm_cmd ? qrm_opts.common
                           : sub == train_cmd ? train_opts.common
                           : sub == bt_cmd ? bt.common
                           : sub == fuse_cmd ? fuse.common
                                             : bin.common;
    const fs::path out_dir(common.out_dir);
    ensure_dir(out_dir);
    json summary = json::object();
    std::vector<std::string> artifacts;
    if (sub == synth_cmd)
      artifacts = run_synth(synth, summary);
    else if (sub == qrm_cmd)
      artifacts = run_qrm(qrm_opts, summary);
    else if (sub == train_cmd)
      artifacts = run_train(train_opts, summary);
    else if (sub == bt_cmd)
      artifacts = run_backtest(bt, summary);
    else if (sub == fuse_cmd)
      artifacts = run_fuse(fuse, summary);
    else
      artifacts = run_binomial(bin, summary);
    write_manifest(out_dir, *sub, resolved_config(*sub), artifacts);
    print_summary(out, summary, common.format);
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace optforecast::cli
