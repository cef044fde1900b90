#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <type_traits>

#include "countfix/inference.hpp"
#include "countfix/montecarlo.hpp"

#ifndef COUNTFIX_VERSION
#define COUNTFIX_VERSION "0.0.0"
#endif

namespace countfix::cli {

namespace {

using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kUndefined = "undefined";

// Conditional columns backed by fewer joint observations than this are listed
// in sim_summary.json but left out of the max-TV figure.
constexpr std::uint64_t kMinConditionalObservations = 10'000;

double rounded(double value) { return std::strtod(format_number(value).c_str(), nullptr); }

std::size_t parse_index(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw UsageError("--prior: invalid " + what + " '" + text + "'");
  }
  if (pos != text.size()) throw UsageError("--prior: invalid " + what + " '" + text + "'");
  return static_cast<std::size_t>(v);
}

std::vector<double> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--prior: cannot open custom prior file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("--prior: custom prior file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_array())
    throw UsageError("--prior: custom prior file must hold a JSON array of numbers");
  std::vector<double> weights;
  for (const auto& item : doc) {
    if (!item.is_number())
      throw UsageError("--prior: custom prior file must hold a JSON array of numbers");
    weights.push_back(item.get<double>());
  }
  try {
    (void)custom_prior(weights);
  } catch (const std::domain_error& e) {
    throw UsageError(std::string("--prior: ") + e.what());
  }
  return weights;
}

// ---- output tables ---------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const Table& table) {
  std::string text;
  auto append_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text += ',';
      text += cells[i];
    }
    text += '\n';
  };
  append_row(table.header);
  for (const auto& row : table.rows) append_row(row);
  return text;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json number_or_null(std::optional<double> v) {
  return v ? json(rounded(*v)) : json(nullptr);
}

// Dense matrix with a row label and optional undefined columns.
struct MatrixArtifact {
  std::string row_name;
  std::string col_name;
  std::size_t n_rows;
  std::size_t n_cols;
  std::function<std::optional<double>(std::size_t, std::size_t)> value;
};

std::string render(const MatrixArtifact& a, Format format) {
  if (format == Format::csv) {
    Table t;
    t.header.push_back(a.row_name + "/" + a.col_name);
    for (std::size_t c = 0; c < a.n_cols; ++c) t.header.push_back(std::to_string(c));
    for (std::size_t r = 0; r < a.n_rows; ++r) {
      std::vector<std::string> row{std::to_string(r)};
      for (std::size_t c = 0; c < a.n_cols; ++c) {
        const auto v = a.value(r, c);
        row.push_back(v ? format_number(*v) : kUndefined);
      }
      t.rows.push_back(std::move(row));
    }
    return to_csv(t);
  }
  json values = json::array();
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < a.n_cols; ++c) row.push_back(number_or_null(a.value(r, c)));
    values.push_back(std::move(row));
  }
  return dump(json{{"rows", a.row_name}, {"columns", a.col_name}, {"values", std::move(values)}});
}

// Record-per-row artifact (pn, optmap, fidelity).
std::string render_records(const std::vector<std::string>& csv_header,
                           const std::vector<std::string>& json_keys,
                           const std::vector<std::vector<std::optional<double>>>& rows,
                           Format format) {
  if (format == Format::csv) {
    Table t{csv_header, {}};
    for (const auto& row : rows) {
      std::vector<std::string> cells;
      for (const auto& v : row) cells.push_back(v ? format_number(*v) : kUndefined);
      t.rows.push_back(std::move(cells));
    }
    return to_csv(t);
  }
  json records = json::array();
  for (const auto& row : rows) {
    json rec = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) rec[json_keys[i]] = number_or_null(row[i]);
    records.push_back(std::move(rec));
  }
  return dump(records);
}

std::string extension(Format format) { return format == Format::csv ? ".csv" : ".json"; }

std::string describe(const PriorSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PdcSpec>) return "pdc:" + format_number(s.chi);
        else if constexpr (std::is_same_v<T, UniformSpec>)
          return "uniform:" + std::to_string(s.lo) + ":" + std::to_string(s.hi);
        else return "custom:" + s.path.string();
      },
      spec);
}

class Emitter {
 public:
  Emitter(const RunConfig& config, std::ostream& out) : config_(config), out_(out) {}

  void emit(const std::string& stem, const std::string& contents, const std::string& what) {
    const std::string name = stem + extension(config_.format);
    write_file(config_.out_dir / name, contents);
    out_ << "wrote " << name << ": " << what << '\n';
  }

  void emit_json(const std::string& name, const json& doc, const std::string& what) {
    write_file(config_.out_dir / name, dump(doc));
    out_ << "wrote " << name << ": " << what << '\n';
  }

 private:
  const RunConfig& config_;
  std::ostream& out_;
};

json simulate_artifacts(const RunConfig& config, const ConditionalMatrix& matrix,
                        const NumberPrior& prior, const PosteriorMatrix& post, Emitter& emitter) {
  const ShotConfig shot_config{config.detector, config.seed, config.shots};
  const auto columns = empirical_matrix(shot_config, config.n_max, config.threads);
  const auto joint = simulate_joint(shot_config, prior, config.threads);

  std::size_t observed_rows = matrix.rows();
  for (const auto& col : columns) observed_rows = std::max(observed_rows, col.counts.size());

  json column_tv = json::array();
  double max_column_tv = 0.0;
  for (const auto& col : columns) {
    const double tv = total_variation(col.frequencies(), matrix.column(col.n));
    max_column_tv = std::max(max_column_tv, tv);
    column_tv.push_back(rounded(tv));
  }

  json conditional_tv = json::array();
  double max_conditional_tv = 0.0;
  for (std::size_t m = 0; m <= joint.m_max() && m < post.cols(); ++m) {
    const std::uint64_t seen = joint.outcome_count(m);
    if (seen == 0 || !post.defined(m)) continue;
    const double tv = total_variation(joint.conditional(m), post.column(m));
    if (seen >= kMinConditionalObservations) max_conditional_tv = std::max(max_conditional_tv, tv);
    conditional_tv.push_back(json{{"m", m}, {"observations", seen}, {"tv", rounded(tv)}});
  }

  emitter.emit(
      "sim_pmn",
      render(MatrixArtifact{"m", "n", observed_rows, columns.size(),
                            [&](std::size_t m, std::size_t n) -> std::optional<double> {
                              const auto& c = columns[n];
                              const std::uint64_t k = m < c.counts.size() ? c.counts[m] : 0;
                              return static_cast<double>(k) / static_cast<double>(c.total);
                            }},
             config.format),
      "empirical P(m|n), " + std::to_string(config.shots) + " shots per column");

  const std::size_t joint_cols = joint.m_max() + 1;
  std::vector<std::vector<double>> conditionals(joint_cols);
  for (std::size_t m = 0; m < joint_cols; ++m) conditionals[m] = joint.conditional(m);
  emitter.emit(
      "sim_pnm",
      render(MatrixArtifact{"n", "m", joint.n_max + 1, joint_cols,
                            [&](std::size_t n, std::size_t m) -> std::optional<double> {
                              if (conditionals[m].empty()) return std::nullopt;
                              return conditionals[m][n];
                            }},
             config.format),
      "empirical P(n|m) from " + std::to_string(config.shots) + " prior-driven shots");

  json summary = {
      {"seed", config.seed},
      {"shots", config.shots},
      {"max_column_tv", rounded(max_column_tv)},
      {"column_tv", std::move(column_tv)},
      {"min_conditional_observations", kMinConditionalObservations},
      {"max_conditional_tv", rounded(max_conditional_tv)},
      {"conditional_tv", std::move(conditional_tv)},
  };
  emitter.emit_json("sim_summary.json", summary, "Monte Carlo agreement statistics");
  return summary;
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

PriorSpec parse_prior_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);

  if (kind == "pdc") {
    std::size_t pos = 0;
    double chi = 0.0;
    try {
      chi = std::stod(rest, &pos);
    } catch (const std::exception&) {
      throw UsageError("--prior: invalid chi '" + rest + "'");
    }
    if (pos != rest.size()) throw UsageError("--prior: invalid chi '" + rest + "'");
    if (!(chi >= 0.0 && chi < 1.0)) throw UsageError("--prior: pdc requires 0 <= chi < 1");
    return PdcSpec{chi};
  }
  if (kind == "uniform") {
    const auto sep = rest.find(':');
    if (sep == std::string::npos) throw UsageError("--prior: expected uniform:<lo>:<hi>");
    const std::size_t lo = parse_index(rest.substr(0, sep), "lo");
    const std::size_t hi = parse_index(rest.substr(sep + 1), "hi");
    if (hi < lo) throw UsageError("--prior: uniform requires hi >= lo");
    return UniformSpec{lo, hi};
  }
  if (kind == "custom") {
    if (rest.empty()) throw UsageError("--prior: expected custom:<path>");
    return CustomSpec{rest, load_weights(rest)};
  }
  throw UsageError("--prior: expected pdc:<chi>, uniform:<lo>:<hi> or custom:<path>, got '" +
                   text + "'");
}

NumberPrior resolve_prior(const PriorSpec& spec, std::size_t n_max) {
  return std::visit(
      [n_max](const auto& s) -> NumberPrior {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PdcSpec>) {
          return pdc_prior(s.chi, n_max);
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          if (s.hi > n_max) throw UsageError("--prior: uniform range exceeds --n-max");
          return uniform_prior(s.lo, s.hi);
        } else {
          for (std::size_t n = n_max + 1; n < s.weights.size(); ++n)
            if (s.weights[n] != 0.0)
              throw UsageError("--prior: custom prior has mass beyond --n-max");
          return custom_prior(s.weights, "custom(" + s.path.filename().string() + ")");
        }
      },
      spec);
}

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig config;
  std::string prior_text = "pdc:0.7";
  std::vector<std::string> emit;
  std::string format_text = "csv";

  CLI::App app{"Bayesian post-processing of number-resolving detector signatures", "countfix"};
  app.set_config("--config", "", "TOML/INI file with flag values; command-line flags win");
  app.set_version_flag("--version", COUNTFIX_VERSION);
  auto* run_cmd = app.add_subcommand("run", "Compute matrices, optimisation map and fidelities");
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo check of the analytic pipeline");
  run_cmd->fallthrough();
  sim_cmd->fallthrough();
  app.require_subcommand(1);

  app.add_option("--p-loss", config.detector.p_loss, "Per-photon loss probability")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--lambda", config.detector.lambda, "Mean dark counts per shot")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--tail-eps", config.detector.tail_epsilon,
                 "Mass allowed above the truncated m range")
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            try {
              const double v = std::stod(s);
              if (v > 0.0 && v < 1.0) return {};
            } catch (const std::exception&) {
            }
            return "value must lie in (0, 1), got " + s;
          },
          "(0,1)"));
  app.add_option("--n-max", config.n_max, "Largest incident photon number");
  app.add_option("--prior", prior_text, "pdc:<chi> | uniform:<lo>:<hi> | custom:<path>");
  app.add_option("--emit", emit, "Comma list of pmn,pn,pnm,optmap,fidelity,simulate")
      ->delimiter(',')
      ->check(CLI::IsMember({"pmn", "pn", "pnm", "optmap", "fidelity", "simulate"}));
  app.add_option("--format", format_text, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", config.out_dir, "Output directory");
  app.add_option("--seed", config.seed, "Monte Carlo seed");
  app.add_option("--shots", config.shots, "Monte Carlo shots per column")
      ->check(CLI::PositiveNumber);
  app.add_option("--threads", config.threads, "Worker threads for simulation (0 = all cores)");

  std::vector<char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw EarlyExit(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw EarlyExit(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::CallForVersion&) {
    throw EarlyExit(std::string(COUNTFIX_VERSION) + "\n");
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  config.prior = parse_prior_spec(prior_text);
  config.format = format_text == "json" ? Format::json : Format::csv;

  const bool simulate_cmd = sim_cmd->parsed();
  if (emit.empty() && !simulate_cmd) emit = {"pmn", "pn", "pnm", "optmap", "fidelity"};
  if (simulate_cmd) emit.push_back("simulate");
  for (const auto& e : emit) {
    if (e == "pmn") config.outputs.pmn = true;
    else if (e == "pn") config.outputs.pn = true;
    else if (e == "pnm") config.outputs.pnm = true;
    else if (e == "optmap") config.outputs.optmap = true;
    else if (e == "fidelity") config.outputs.fidelity = true;
    else if (e == "simulate") config.outputs.simulate = true;
  }
  if (!config.outputs.any()) throw UsageError("--emit: select at least one output");
  if (config.outputs.simulate && config.detector.lambda > kMaxSampledLambda)
    throw UsageError("--lambda: simulation supports lambda <= 1000");

  (void)resolve_prior(config.prior, config.n_max);  // surfaces range errors now
  return config;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  NumberPrior prior;
  try {
    prior = resolve_prior(config.prior, config.n_max);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const ConditionalMatrix matrix = build_matrix(config.detector, config.n_max);
  const PosteriorMatrix post = posterior(matrix, prior);
  const OptimisationReport report = optimisation_map(post);

  if (!report.undefined_outcomes.empty()) {
    err << "warning: " << report.undefined_outcomes.size()
        << " outcome(s) have zero probability under prior " << prior.label << " (m =";
    for (std::size_t m : report.undefined_outcomes) err << ' ' << m;
    err << "); their posterior columns are undefined\n";
  }

  try {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + config.out_dir.string() + "'");

    Emitter emitter(config, out);
    const Outputs& sel = config.outputs;
    const std::string dims = "n=0.." + std::to_string(matrix.n_max()) +
                             ", m=0.." + std::to_string(matrix.m_max());

    if (sel.pmn) {
      emitter.emit("pmn",
                   render(MatrixArtifact{"m", "n", matrix.rows(), matrix.cols(),
                                         [&](std::size_t m, std::size_t n) -> std::optional<double> {
                                           return matrix.at(m, n);
                                         }},
                          config.format),
                   "P(m|n), " + dims);
    }
    if (sel.pn) {
      std::vector<std::vector<std::optional<double>>> rows;
      for (std::size_t n = 0; n <= config.n_max; ++n)
        rows.push_back({static_cast<double>(n), n < prior.probs.size() ? prior.probs[n] : 0.0});
      emitter.emit("pn", render_records({"n", "P(n)"}, {"n", "p"}, rows, config.format),
                   "prior " + prior.label);
    }
    if (sel.pnm) {
      emitter.emit("pnm",
                   render(MatrixArtifact{"n", "m", post.rows(), post.cols(),
                                         [&](std::size_t n, std::size_t m) -> std::optional<double> {
                                           if (!post.defined(m)) return std::nullopt;
                                           return post.at(n, m);
                                         }},
                          config.format),
                   "P(n|m), " + dims);
    }
    if (sel.optmap) {
      std::vector<std::vector<std::optional<double>>> rows;
      for (std::size_t m = 0; m <= report.m_max; ++m) {
        std::optional<double> target;
        if (report.map[m]) target = static_cast<double>(*report.map[m]);
        rows.push_back({static_cast<double>(m), target});
      }
      emitter.emit("optmap", render_records({"m", "m_opt"}, {"m", "m_opt"}, rows, config.format),
                   "optimisation map m -> m_opt");
    }
    if (sel.fidelity) {
      std::vector<std::vector<std::optional<double>>> rows;
      for (std::size_t m = 0; m <= report.m_max; ++m) {
        std::optional<double> raw, opt;
        if (report.defined(m)) {
          raw = report.fidelity_raw[m];
          opt = report.fidelity_opt[m];
        }
        rows.push_back({static_cast<double>(m), report.outcome_marginal[m], raw, opt});
      }
      emitter.emit("fidelity",
                   render_records({"m", "P(m)", "F_raw", "F_opt"}, {"m", "p_m", "f_raw", "f_opt"},
                                  rows, config.format),
                   "raw and optimised fidelities");
    }

    json summary = {
        {"tool", "countfix"},
        {"version", COUNTFIX_VERSION},
        {"detector",
         {{"p_loss", config.detector.p_loss},
          {"lambda", config.detector.lambda},
          {"tail_epsilon", config.detector.tail_epsilon}}},
        {"prior", describe(config.prior)},
        {"prior_label", prior.label},
        {"n_max", matrix.n_max()},
        {"m_max", matrix.m_max()},
        {"avg_fidelity_raw", rounded(report.avg_fidelity_raw)},
        {"avg_fidelity_opt", rounded(report.avg_fidelity_opt)},
        {"undefined_outcomes", report.undefined_outcomes},
    };
    json tied = json::array();
    for (std::size_t m = 0; m < report.tied.size(); ++m)
      if (report.tied[m]) tied.push_back(m);
    summary["tied_outcomes"] = std::move(tied);

    if (sel.simulate) summary["simulation"] = simulate_artifacts(config, matrix, prior, post, emitter);

    emitter.emit_json("summary.json", summary, "averaged fidelities and run parameters");
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_config(args);
  } catch (const EarlyExit& e) {
    out << e.what();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }
  try {
    return run(config, out, err);
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace countfix::cli
