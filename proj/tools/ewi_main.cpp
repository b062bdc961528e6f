// ewi: command-line front end for the early-warning-indicator pipeline.
//
// Settings resolve in order: built-in defaults < config file (--config, JSON
// with nested sections) < environment overrides (EWI_ prefix) < command-line
// flags. EWI_<SECTION>_<KEY> targets a section key (EWI_MODEL_K=20), other
// EWI_<KEY> names target top-level keys (EWI_SEED=7); values are parsed as
// JSON where possible, else taken as strings.
//
// Every command writes into a temp directory that is renamed to --out on
// success, with a manifest.json (command, effective settings, content hashes)
// written last; failed runs leave nothing behind.

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ewi/errors.hpp"
#include "ewi/evaluation.hpp"
#include "ewi/indicator.hpp"
#include "ewi/ledger.hpp"
#include "ewi/linalg.hpp"
#include "ewi/matrix_io.hpp"
#include "ewi/pipeline.hpp"
#include "ewi/rng.hpp"
#include "ewi/synth.hpp"
#include "ewi/volatility.hpp"

extern char** environ;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;
constexpr int kExitData = 66;
constexpr int kExitInternal = 70;

// ---------------------------------------------------------------- settings

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ewi::ConfigError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw ewi::ConfigError("config root must be an object");
    return j;
  } catch (const json::exception& e) {
    throw ewi::ConfigError(std::string("bad config file ") + path + ": " +
                           e.what());
  }
}

void apply_env_overrides(json& cfg) {
  static const char* sections[] = {"data",      "solver", "model",
                                   "partition", "eval",   "synth"};
  for (char** e = environ; *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind("EWI_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(4, eq - 4);
    const std::string raw = entry.substr(eq + 1);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (key.empty()) continue;

    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // plain string (paths, names)
    }

    bool placed = false;
    for (const char* section : sections) {
      const std::string prefix = std::string(section) + "_";
      if (key.rfind(prefix, 0) == 0 && key.size() > prefix.size()) {
        cfg[section][key.substr(prefix.size())] = value;
        placed = true;
        break;
      }
    }
    if (!placed) cfg[key] = value;
  }
}

const json* cfg_node(const json& cfg, const char* section, const char* key) {
  const json* node = &cfg;
  if (section) {
    const auto it = cfg.find(section);
    if (it == cfg.end()) return nullptr;
    if (!it->is_object())
      throw ewi::ConfigError(std::string("config section '") + section +
                             "' must be an object");
    node = &*it;
  }
  const auto it = node->find(key);
  if (it == node->end() || it->is_null()) return nullptr;
  return &*it;
}

template <typename T>
T cfg_get(const json& cfg, const char* section, const char* key, T def) {
  const json* v = cfg_node(cfg, section, key);
  if (!v) return def;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    throw ewi::ConfigError(std::string("config key ") +
                           (section ? std::string(section) + "." : "") + key +
                           " has the wrong type");
  }
}

// Resolved global context shared by every command.
struct Ctx {
  json cfg = json::object();
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out;
};

// --------------------------------------------------------------- out dirs

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& args, const json& cfg) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      files.push_back(fs::relative(entry.path(), dir).generic_string());
  std::sort(files.begin(), files.end());

  json m;
  m["format"] = "ewi-manifest/1";
  m["command"] = command;
  m["args"] = args;
  json snapshot = cfg;
  snapshot.erase("out");  // reruns into another directory must match bytewise
  m["config"] = snapshot;
  json hashes = json::object();
  for (const auto& f : files) hashes[f] = hex64(ewi::io::fnv1a_file(dir / f));
  m["artifacts"] = hashes;

  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
  out.flush();
  if (!out) throw ewi::DataError("cannot write manifest in " + dir.string());
}

// Staging directory renamed onto the final path only after the manifest is
// in place; anything half-written is removed on the way out.
class OutDir {
 public:
  explicit OutDir(const std::string& final_path) : final_(final_path) {
    if (final_.empty())
      throw ewi::ConfigError("no output directory (use --out or config 'out')");
    if (fs::exists(final_))
      throw ewi::ConfigError("output directory already exists: " +
                             final_.string());
    tmp_ = final_;
    tmp_ += ".tmp-" + std::to_string(::getpid());
    std::error_code ec;
    fs::remove_all(tmp_, ec);
    fs::create_directories(tmp_);
  }

  OutDir(const OutDir&) = delete;
  OutDir& operator=(const OutDir&) = delete;

  ~OutDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& path() const { return tmp_; }

  void commit(const std::string& command, const json& args, const json& cfg) {
    write_manifest(tmp_, command, args, cfg);
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    fs::rename(tmp_, final_);
    committed_ = true;
    std::cout << "wrote " << final_.string() << "\n";
  }

 private:
  fs::path final_;
  fs::path tmp_;
  bool committed_ = false;
};

// ------------------------------------------------------------- converters

ewi::BacktestParams params_from(const Ctx& ctx) {
  const json& c = ctx.cfg;
  ewi::BacktestParams p;
  p.k = cfg_get(c, "model", "k", p.k);
  p.delta = cfg_get(c, "model", "delta", p.delta);
  p.lambda = cfg_get(c, "model", "lambda", p.lambda);
  p.lambda_coeff = cfg_get(c, "model", "lambda_coeff", p.lambda_coeff);
  p.ridge = cfg_get(c, "model", "ridge", p.ridge);
  p.partition_delta = cfg_get(c, "partition", "delta", p.partition_delta);
  p.m_days = cfg_get(c, "partition", "m_days", p.m_days);
  p.nmf_opts.max_iters = cfg_get(c, "solver", "max_iters", p.nmf_opts.max_iters);
  p.nmf_opts.rel_tol = cfg_get(c, "solver", "rel_tol", p.nmf_opts.rel_tol);
  p.nmf_opts.denom_floor =
      cfg_get(c, "solver", "denom_floor", p.nmf_opts.denom_floor);
  p.nnls_opts.max_iters =
      cfg_get(c, "solver", "nnls_max_iters", p.nnls_opts.max_iters);
  p.nnls_opts.rel_tol = cfg_get(c, "solver", "nnls_rel_tol", p.nnls_opts.rel_tol);
  p.nnls_opts.denom_floor = p.nmf_opts.denom_floor;
  p.seed = ctx.seed;
  p.threads = ctx.threads;
  return p;
}

json params_to_json(const ewi::BacktestParams& p) {
  return {{"k", p.k},
          {"delta", p.delta},
          {"lambda", p.lambda},
          {"lambda_coeff", p.lambda_coeff},
          {"ridge", p.ridge},
          {"partition_delta", p.partition_delta},
          {"m_days", p.m_days},
          {"nmf_max_iters", p.nmf_opts.max_iters},
          {"nmf_rel_tol", p.nmf_opts.rel_tol},
          {"nnls_max_iters", p.nnls_opts.max_iters},
          {"nnls_rel_tol", p.nnls_opts.rel_tol},
          {"denom_floor", p.nmf_opts.denom_floor},
          {"seed", p.seed}};
}

std::vector<ewi::IndicatorKind> kinds_from(const Ctx& ctx) {
  const std::vector<std::string> names = cfg_get<std::vector<std::string>>(
      ctx.cfg, "eval", "indicators", {"nmf_nlr", "svd_lr", "volume"});
  if (names.empty()) throw ewi::ConfigError("eval.indicators is empty");
  std::vector<ewi::IndicatorKind> kinds;
  kinds.reserve(names.size());
  for (const auto& n : names) kinds.push_back(ewi::indicator_kind_from(n));
  return kinds;
}

ewi::SynthSpec synth_from_json(const json& s, std::uint64_t fallback_seed) {
  if (!s.is_object()) throw ewi::ConfigError("synth spec must be an object");
  ewi::SynthSpec sp;
  sp.m = s.value("m", sp.m);
  sp.t = s.value("t", sp.t);
  sp.k_true = s.value("k_true", sp.k_true);
  sp.noise_level = s.value("noise_level", sp.noise_level);
  sp.coupling_lags = s.value("coupling_lags", sp.coupling_lags);
  sp.n_risky = s.value("n_risky", sp.n_risky);
  sp.n_bursts = s.value("n_bursts", sp.n_bursts);
  sp.burst_len_min = s.value("burst_len_min", sp.burst_len_min);
  sp.burst_len_max = s.value("burst_len_max", sp.burst_len_max);
  sp.burst_gain = s.value("burst_gain", sp.burst_gain);
  sp.alpha = s.value("alpha", sp.alpha);
  sp.extreme_frac = s.value("extreme_frac", sp.extreme_frac);
  sp.sigma_noise = s.value("sigma_noise", sp.sigma_noise);
  sp.base_volume = s.value("base_volume", sp.base_volume);
  sp.seed = s.value("seed", fallback_seed);
  if (s.contains("coupling") && !s["coupling"].is_null()) {
    const auto& rows = s["coupling"];
    if (!rows.is_array() || rows.empty())
      throw ewi::ConfigError("synth coupling must be a non-empty 2d array");
    const size_t cols = rows[0].is_array() ? rows[0].size() : 0;
    if (cols == 0)
      throw ewi::ConfigError("synth coupling must be a non-empty 2d array");
    sp.coupling.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(cols));
    for (size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].is_array() || rows[r].size() != cols)
        throw ewi::ConfigError("synth coupling rows must have equal length");
      for (size_t c = 0; c < cols; ++c)
        sp.coupling(static_cast<Eigen::Index>(r),
                    static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
  }
  return sp;
}

json synth_to_json(const ewi::SynthSpec& sp) {
  json j{{"m", sp.m},
         {"t", sp.t},
         {"k_true", sp.k_true},
         {"noise_level", sp.noise_level},
         {"coupling_lags", sp.coupling_lags},
         {"n_risky", sp.n_risky},
         {"n_bursts", sp.n_bursts},
         {"burst_len_min", sp.burst_len_min},
         {"burst_len_max", sp.burst_len_max},
         {"burst_gain", sp.burst_gain},
         {"alpha", sp.alpha},
         {"extreme_frac", sp.extreme_frac},
         {"sigma_noise", sp.sigma_noise},
         {"base_volume", sp.base_volume},
         {"seed", sp.seed}};
  if (sp.coupling.size() > 0) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < sp.coupling.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < sp.coupling.cols(); ++c)
        row.push_back(sp.coupling(r, c));
      rows.push_back(row);
    }
    j["coupling"] = rows;
  }
  return j;
}

void check_contiguous(const ewi::EvolutionMatrix& x) {
  if (x.days.empty())
    throw ewi::DataError("evolution matrix has no day axis");
  for (size_t i = 1; i < x.days.size(); ++i)
    if (x.days[i] != x.days[i - 1] + 1)
      throw ewi::DataError("evolution matrix days must be contiguous");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Metrics = std::vector<std::pair<std::string, std::string>>;

// ----------------------------------------------------------- subcommands

struct IngestArgs {
  std::string ledger, encoding;
  int min_tx = -1, min_span = -1;
  int day_begin = std::numeric_limits<int>::min();
  int day_end = std::numeric_limits<int>::min();
};

int cmd_ingest(const Ctx& ctx, const IngestArgs& a, const CLI::App& sub) {
  const std::string ledger_path =
      sub.count("--ledger") ? a.ledger
                            : cfg_get<std::string>(ctx.cfg, "data", "ledger", "");
  if (ledger_path.empty())
    throw ewi::ConfigError("ingest needs --ledger or config data.ledger");
  const std::string enc_name =
      sub.count("--encoding")
          ? a.encoding
          : cfg_get<std::string>(ctx.cfg, "data", "encoding", "node");
  ewi::Encoding enc;
  if (enc_name == "node")
    enc = ewi::Encoding::node;
  else if (enc_name == "edge")
    enc = ewi::Encoding::edge;
  else
    throw ewi::ConfigError("encoding must be node or edge, got '" + enc_name +
                           "'");
  const int min_tx =
      sub.count("--min-tx") ? a.min_tx : cfg_get(ctx.cfg, "data", "min_tx", 100);
  const int min_span = sub.count("--min-span")
                           ? a.min_span
                           : cfg_get(ctx.cfg, "data", "min_span", 600);

  const auto events = ewi::read_ledger(ledger_path);
  if (events.empty()) throw ewi::DataError("ledger has no events");

  int lo = events.front().day, hi = events.front().day;
  for (const auto& ev : events) {
    lo = std::min(lo, ev.day);
    hi = std::max(hi, ev.day);
  }
  ewi::DayRange range{lo, hi + 1};
  if (sub.count("--day-begin")) range.begin = a.day_begin;
  else range.begin = cfg_get(ctx.cfg, "data", "day_begin", range.begin);
  if (sub.count("--day-end")) range.end = a.day_end;
  else range.end = cfg_get(ctx.cfg, "data", "day_end", range.end);
  if (range.length() <= 0)
    throw ewi::ConfigError("ingest: empty day range [" +
                           std::to_string(range.begin) + ", " +
                           std::to_string(range.end) + ")");

  const ewi::UserMapping mapping = ewi::merge_addresses(events);
  const ewi::LongTermFilter filter{min_tx, min_span,
                                   std::numeric_limits<int>::max()};
  const auto users = ewi::filter_long_term_users(events, mapping, filter);
  if (users.empty())
    throw ewi::DataError("no users pass the long-term filter (min_tx=" +
                         std::to_string(min_tx) + ", min_span=" +
                         std::to_string(min_span) + ")");

  const ewi::EvolutionMatrix x =
      ewi::encode_snapshots(events, mapping, users, enc, range);

  OutDir out(ctx.out);
  ewi::io::save_evolution(out.path() / "x", x);
  ewi::io::save_day_series(out.path() / "volume.tsv", ewi::daily_volume(x));
  {
    std::vector<std::pair<std::string, int>> addr(mapping.addresses().begin(),
                                                  mapping.addresses().end());
    std::sort(addr.begin(), addr.end());
    std::ofstream map_out(out.path() / "mapping.tsv");
    for (const auto& [address, user] : addr)
      map_out << address << '\t' << user << '\n';
    map_out.flush();
    if (!map_out) throw ewi::DataError("cannot write mapping.tsv");
  }
  const Metrics metrics{
      {"events", std::to_string(events.size())},
      {"users_total", std::to_string(mapping.user_count())},
      {"users_kept", std::to_string(users.size())},
      {"rows", std::to_string(x.rows())},
      {"days", std::to_string(x.cols())},
  };
  ewi::io::save_metrics(out.path() / "metrics.txt", metrics);

  std::cout << "ingest: " << x.rows() << " rows x " << x.cols() << " days ("
            << enc_name << " encoding, " << users.size() << " of "
            << mapping.user_count() << " users kept)\n";
  out.commit("ingest",
             {{"ledger", ledger_path},
              {"encoding", enc_name},
              {"min_tx", min_tx},
              {"min_span", min_span},
              {"day_begin", range.begin},
              {"day_end", range.end}},
             ctx.cfg);
  return 0;
}

struct LabelArgs {
  std::string ohlc, epoch;
  double alpha = -1.0;
  int h = -1;
};

std::optional<std::string> epoch_of(const Ctx& ctx, const CLI::App& sub,
                                    const std::string& flag_value) {
  std::string epoch = sub.count("--epoch")
                          ? flag_value
                          : cfg_get<std::string>(ctx.cfg, "data", "epoch", "");
  if (epoch.empty()) return std::nullopt;
  return epoch;
}

int cmd_label(const Ctx& ctx, const LabelArgs& a, const CLI::App& sub) {
  const std::string ohlc_path =
      sub.count("--ohlc") ? a.ohlc
                          : cfg_get<std::string>(ctx.cfg, "data", "ohlc", "");
  if (ohlc_path.empty())
    throw ewi::ConfigError("label needs --ohlc or config data.ohlc");
  const double alpha =
      sub.count("--alpha") ? a.alpha : cfg_get(ctx.cfg, "eval", "alpha", 0.1);
  const int h =
      sub.count("--horizon") ? a.h : cfg_get(ctx.cfg, "eval", "h", 1);

  const auto bars = ewi::io::read_ohlc(ohlc_path, epoch_of(ctx, sub, a.epoch));
  const ewi::DaySeries sigma = ewi::garman_klass_series(bars);
  const ewi::GroundTruthLabels gt = ewi::label_extremes(sigma, alpha, h);
  const double eps = ewi::positive_rate(gt);

  OutDir out(ctx.out);
  ewi::io::save_labels(out.path() / "labels.tsv", gt);
  ewi::io::save_day_series(out.path() / "sigma.tsv", sigma);
  const Metrics metrics{
      {"alpha", fmt_double(alpha)},
      {"h", std::to_string(h)},
      {"n", std::to_string(gt.size())},
      {"positives", std::to_string(static_cast<int>(
                        std::count(gt.labels.begin(), gt.labels.end(), 1)))},
      {"epsilon", fmt_double(eps)},
  };
  ewi::io::save_metrics(out.path() / "metrics.txt", metrics);

  std::cout << "label: " << gt.size() << " anchors, positive rate "
            << fmt_double(eps) << " (alpha=" << alpha << ", h=" << h << ")\n";
  out.commit("label",
             {{"ohlc", ohlc_path}, {"alpha", alpha}, {"h", h}}, ctx.cfg);
  return 0;
}

struct DecomposeArgs {
  std::string in;
  int k = -1;
  double lambda = -1.0;
};

int cmd_decompose(const Ctx& ctx, const DecomposeArgs& a, const CLI::App& sub) {
  const std::string in_dir =
      sub.count("--in") ? a.in : cfg_get<std::string>(ctx.cfg, "data", "x", "");
  if (in_dir.empty())
    throw ewi::ConfigError("decompose needs --in or config data.x");
  const int k = sub.count("--k") ? a.k : cfg_get(ctx.cfg, "model", "k", 10);
  const double lambda =
      sub.count("--lambda") ? a.lambda : cfg_get(ctx.cfg, "model", "lambda", 1.0);

  const ewi::EvolutionMatrix x = ewi::io::load_evolution(in_dir);
  ewi::SolverOptions opts;
  opts.max_iters = cfg_get(ctx.cfg, "solver", "max_iters", opts.max_iters);
  opts.rel_tol = cfg_get(ctx.cfg, "solver", "rel_tol", opts.rel_tol);
  opts.denom_floor = cfg_get(ctx.cfg, "solver", "denom_floor", opts.denom_floor);
  opts.seed = ctx.seed;

  const ewi::FactorPair fp = ewi::robust_nmf(x.values, k, lambda, opts);
  const double score = ewi::reconstruction_score(x.values, fp.W, fp.H);

  OutDir out(ctx.out);
  ewi::io::save_matrix(out.path() / "W.bin", fp.W);
  ewi::io::save_matrix(out.path() / "H.bin", fp.H);
  ewi::io::save_matrix_tsv(out.path() / "W.tsv", fp.W);
  ewi::io::save_matrix_tsv(out.path() / "H.tsv", fp.H);
  {
    std::ofstream rows(out.path() / "rows.tsv");
    for (const auto& label : x.row_labels()) rows << label << '\n';
    std::ofstream days(out.path() / "days.tsv");
    for (int d : x.days) days << d << '\n';
  }
  const Metrics metrics{
      {"k", std::to_string(k)},
      {"lambda", fmt_double(lambda)},
      {"iterations", std::to_string(fp.iterations)},
      {"objective", fmt_double(fp.objective)},
      {"reconstruction_score", fmt_double(score)},
      {"seed", std::to_string(opts.seed)},
  };
  ewi::io::save_metrics(out.path() / "metrics.txt", metrics);

  std::cout << "decompose: k=" << k << ", " << fp.iterations
            << " iterations, reconstruction score " << fmt_double(score)
            << "\n";
  out.commit("decompose",
             {{"in", in_dir},
              {"k", k},
              {"lambda", lambda},
              {"seed", opts.seed},
              {"max_iters", opts.max_iters},
              {"rel_tol", opts.rel_tol}},
             ctx.cfg);
  return 0;
}

struct TrainArgs {
  std::string x, ohlc, epoch;
  int k = -1, delta = -1;
  double lambda = -1.0, lambda_coeff = -1.0;
};

int cmd_train(const Ctx& ctx, const TrainArgs& a, const CLI::App& sub) {
  const std::string x_dir =
      sub.count("--x") ? a.x : cfg_get<std::string>(ctx.cfg, "data", "x", "");
  const std::string ohlc_path =
      sub.count("--ohlc") ? a.ohlc
                          : cfg_get<std::string>(ctx.cfg, "data", "ohlc", "");
  if (x_dir.empty() || ohlc_path.empty())
    throw ewi::ConfigError("train needs --x and --ohlc (or config data.x/data.ohlc)");
  const int k = sub.count("--k") ? a.k : cfg_get(ctx.cfg, "model", "k", 10);
  const int delta =
      sub.count("--delta") ? a.delta : cfg_get(ctx.cfg, "model", "delta", 5);
  const double lambda =
      sub.count("--lambda") ? a.lambda : cfg_get(ctx.cfg, "model", "lambda", 1.0);
  const double lambda_coeff = sub.count("--lambda-coeff")
                                  ? a.lambda_coeff
                                  : cfg_get(ctx.cfg, "model", "lambda_coeff", 1.0);

  const ewi::EvolutionMatrix x = ewi::io::load_evolution(x_dir);
  check_contiguous(x);
  const auto bars = ewi::io::read_ohlc(ohlc_path, epoch_of(ctx, sub, a.epoch));
  const ewi::DaySeries sigma = ewi::garman_klass_series(bars);

  const ewi::BacktestParams defaults = params_from(ctx);
  ewi::SolverOptions nmf_o = defaults.nmf_opts;
  nmf_o.seed = ewi::substream_seed(ctx.seed, 0);
  ewi::SolverOptions nnls_o = defaults.nnls_opts;
  nnls_o.seed = ewi::substream_seed(ctx.seed, 1);

  const int first_day = x.days.front();
  const ewi::TrainedEwi trained =
      ewi::train_ewi(x.values, first_day, sigma, k, delta, lambda, lambda_coeff,
                     nmf_o, nnls_o);

  OutDir out(ctx.out);
  ewi::io::save_model(out.path() / "model.json",
                      {trained.model,
                       {first_day, first_day + static_cast<int>(x.cols())}});
  ewi::io::save_matrix(out.path() / "H.bin", trained.h_train);
  ewi::io::save_matrix_tsv(out.path() / "coeff.tsv", trained.model.coeff);
  const Metrics metrics{
      {"k", std::to_string(k)},
      {"delta", std::to_string(delta)},
      {"lambda", fmt_double(lambda)},
      {"lambda_coeff", fmt_double(lambda_coeff)},
      {"nmf_iterations", std::to_string(trained.nmf_iterations)},
      {"nmf_objective", fmt_double(trained.nmf_objective)},
      {"coeff_nonzero",
       std::to_string((trained.model.coeff.array() > 0.0).count())},
  };
  ewi::io::save_metrics(out.path() / "metrics.txt", metrics);

  std::cout << "train: k=" << k << " delta=" << delta << ", nmf objective "
            << fmt_double(trained.nmf_objective) << " after "
            << trained.nmf_iterations << " iterations\n";
  out.commit("train",
             {{"x", x_dir},
              {"ohlc", ohlc_path},
              {"k", k},
              {"delta", delta},
              {"lambda", lambda},
              {"lambda_coeff", lambda_coeff},
              {"seed", ctx.seed}},
             ctx.cfg);
  return 0;
}

void write_backtest_dir(const fs::path& dir, const ewi::BacktestResult& r) {
  fs::create_directories(dir);
  for (const auto& fr : r.folds) {
    char name[32];
    std::snprintf(name, sizeof name, "fold_%03d", fr.index);
    ewi::io::save_scores(dir / (std::string(name) + ".scores.tsv"), fr.scored);
    ewi::io::save_labels(dir / (std::string(name) + ".labels.tsv"), fr.scored);
  }
  ewi::io::save_scores(dir / "pooled.scores.tsv", r.pool.pooled);
  ewi::io::save_labels(dir / "pooled.labels.tsv", r.pool.pooled);
  ewi::io::save_curve(dir / "roc.tsv", r.pool.roc.curve);
  ewi::io::save_curve(dir / "pr.tsv", r.pool.pr.curve);

  {
    std::ofstream folds(dir / "folds.tsv");
    folds << "fold\ttrain_begin\ttrain_end\tholdout_begin\tholdout_end\tn\t"
             "positives\tdegenerate\tauc_roc\tauc_pr\tmax_train_day\n";
    for (size_t i = 0; i < r.folds.size(); ++i) {
      const auto& fr = r.folds[i];
      const auto& fm = r.pool.per_fold[i];
      folds << fr.index << '\t' << fr.fold.train.begin << '\t'
            << fr.fold.train.end << '\t' << fr.fold.holdout.begin << '\t'
            << fr.fold.holdout.end << '\t' << fm.n << '\t' << fm.positives
            << '\t' << (fm.degenerate ? 1 : 0) << '\t'
            << (fm.degenerate ? "nan" : fmt_double(fm.auc_roc)) << '\t'
            << (fm.degenerate ? "nan" : fmt_double(fm.auc_pr)) << '\t'
            << fr.max_train_day << '\n';
    }
    folds.flush();
    if (!folds) throw ewi::DataError("cannot write folds.tsv");
  }

  int folds_used = 0, folds_degenerate = 0;
  for (const auto& fm : r.pool.per_fold)
    (fm.degenerate ? folds_degenerate : folds_used) += 1;
  const Metrics metrics{
      {"indicator", ewi::to_string(r.kind)},
      {"alpha", fmt_double(r.alpha)},
      {"h", std::to_string(r.h)},
      {"n_pooled", std::to_string(r.pool.pooled.size())},
      {"positives_pooled", std::to_string(r.pool.pooled.positives())},
      {"epsilon", fmt_double(r.epsilon)},
      {"auc_roc", fmt_double(r.pool.roc.auc)},
      {"auc_pr", fmt_double(r.pool.pr.auc)},
      {"auc_pr_minus_eps", fmt_double(r.pool.pr.auc - r.epsilon)},
      {"n_all", std::to_string(r.n_all)},
      {"positives_all", std::to_string(r.positives_all)},
      {"folds", std::to_string(r.folds.size())},
      {"folds_used", std::to_string(folds_used)},
      {"folds_degenerate", std::to_string(folds_degenerate)},
  };
  ewi::io::save_metrics(dir / "metrics.txt", metrics);
}

struct BacktestArgs {
  std::string x, ohlc, epoch;
  double alpha = -1.0;
  int h = -1;
};

int cmd_backtest(const Ctx& ctx, const BacktestArgs& a, const CLI::App& sub) {
  const std::string x_dir =
      sub.count("--x") ? a.x : cfg_get<std::string>(ctx.cfg, "data", "x", "");
  const std::string ohlc_path =
      sub.count("--ohlc") ? a.ohlc
                          : cfg_get<std::string>(ctx.cfg, "data", "ohlc", "");
  if (x_dir.empty() || ohlc_path.empty())
    throw ewi::ConfigError(
        "backtest needs config data.x and data.ohlc (or --x/--ohlc)");
  const double alpha =
      sub.count("--alpha") ? a.alpha : cfg_get(ctx.cfg, "eval", "alpha", 0.1);
  const int h =
      sub.count("--horizon") ? a.h : cfg_get(ctx.cfg, "eval", "h", 1);

  const ewi::EvolutionMatrix x = ewi::io::load_evolution(x_dir);
  const auto bars = ewi::io::read_ohlc(ohlc_path, epoch_of(ctx, sub, a.epoch));
  const ewi::BacktestParams params = params_from(ctx);
  const auto kinds = kinds_from(ctx);

  OutDir out(ctx.out);
  for (const ewi::IndicatorKind kind : kinds) {
    const ewi::BacktestResult r =
        ewi::run_backtest(x, bars, kind, params, alpha, h);
    write_backtest_dir(out.path() / ewi::to_string(kind), r);
    std::cout << "backtest " << ewi::to_string(kind) << ": alpha=" << alpha
              << " h=" << h << " AUC ROC " << fmt_double(r.pool.roc.auc)
              << ", AUC PR " << fmt_double(r.pool.pr.auc) << " (epsilon "
              << fmt_double(r.epsilon) << ")\n";
  }

  json kind_names = json::array();
  for (const auto kind : kinds) kind_names.push_back(ewi::to_string(kind));
  json args{{"x", x_dir},
            {"ohlc", ohlc_path},
            {"alpha", alpha},
            {"h", h},
            {"indicators", kind_names}};
  args.update(params_to_json(params));
  out.commit("backtest", args, ctx.cfg);
  return 0;
}

struct SweepArgs {
  std::string x, ohlc, epoch;
};

int cmd_sweep(const Ctx& ctx, const SweepArgs& a, const CLI::App& sub) {
  const std::string x_dir =
      sub.count("--x") ? a.x : cfg_get<std::string>(ctx.cfg, "data", "x", "");
  const std::string ohlc_path =
      sub.count("--ohlc") ? a.ohlc
                          : cfg_get<std::string>(ctx.cfg, "data", "ohlc", "");
  if (x_dir.empty() || ohlc_path.empty())
    throw ewi::ConfigError(
        "sweep needs config data.x and data.ohlc (or --x/--ohlc)");

  ewi::SweepGrid grid;
  grid.alphas = cfg_get(ctx.cfg, "eval", "alphas", grid.alphas);
  grid.hs = cfg_get(ctx.cfg, "eval", "hs", grid.hs);
  grid.ks = cfg_get(ctx.cfg, "eval", "ks", grid.ks);
  grid.deltas = cfg_get(ctx.cfg, "eval", "deltas", grid.deltas);

  const ewi::EvolutionMatrix x = ewi::io::load_evolution(x_dir);
  const auto bars = ewi::io::read_ohlc(ohlc_path, epoch_of(ctx, sub, a.epoch));
  const ewi::BacktestParams params = params_from(ctx);
  const auto kinds = kinds_from(ctx);

  const ewi::SweepTable table =
      ewi::sensitivity_sweep(x, bars, grid, kinds, params);

  OutDir out(ctx.out);
  ewi::io::save_sweep_table(out.path() / "sweep.tsv", table);
  const Metrics metrics{
      {"rows", std::to_string(table.rows.size())},
      {"indicators", std::to_string(kinds.size())},
      {"alphas", std::to_string(grid.alphas.size())},
      {"hs", std::to_string(grid.hs.size())},
      {"ks", std::to_string(grid.ks.size())},
      {"deltas", std::to_string(grid.deltas.size())},
  };
  ewi::io::save_metrics(out.path() / "metrics.txt", metrics);

  std::cout << "sweep: " << table.rows.size() << " cells\n";
  json kind_names = json::array();
  for (const auto kind : kinds) kind_names.push_back(ewi::to_string(kind));
  json args{{"x", x_dir},
            {"ohlc", ohlc_path},
            {"indicators", kind_names},
            {"alphas", grid.alphas},
            {"hs", grid.hs},
            {"ks", grid.ks},
            {"deltas", grid.deltas}};
  args.update(params_to_json(params));
  out.commit("sweep", args, ctx.cfg);
  return 0;
}

struct EvaluateArgs {
  std::string scores, labels;
};

int cmd_evaluate(const Ctx& ctx, const EvaluateArgs& a) {
  const ewi::ScoredLabels sl = ewi::io::load_scored(a.scores, a.labels);
  if (sl.size() == 0) throw ewi::DataError("no scored anchors to evaluate");
  if (sl.positives() == 0)
    throw ewi::DataError("evaluate: no positive labels");
  if (sl.negatives() == 0)
    throw ewi::DataError("evaluate: no negative labels");

  const ewi::CurveResult roc = ewi::roc_curve(sl);
  const ewi::CurveResult pr = ewi::pr_curve(sl);
  const double eps = static_cast<double>(sl.positives()) / sl.size();

  OutDir out(ctx.out);
  ewi::io::save_curve(out.path() / "roc.tsv", roc.curve);
  ewi::io::save_curve(out.path() / "pr.tsv", pr.curve);
  const Metrics metrics{
      {"n", std::to_string(sl.size())},
      {"positives", std::to_string(sl.positives())},
      {"epsilon", fmt_double(eps)},
      {"auc_roc", fmt_double(roc.auc)},
      {"auc_pr", fmt_double(pr.auc)},
      {"auc_pr_minus_eps", fmt_double(pr.auc - eps)},
  };
  ewi::io::save_metrics(out.path() / "metrics.txt", metrics);

  std::cout << "evaluate: n=" << sl.size() << " AUC ROC "
            << fmt_double(roc.auc) << ", AUC PR " << fmt_double(pr.auc)
            << " (epsilon " << fmt_double(eps) << ")\n";
  out.commit("evaluate", {{"scores", a.scores}, {"labels", a.labels}},
             ctx.cfg);
  return 0;
}

struct SynthArgs {
  std::string spec;
};

int cmd_synth(const Ctx& ctx, const SynthArgs& a, const CLI::App& sub) {
  json spec_json;
  if (sub.count("--spec")) {
    spec_json = load_config_file(a.spec);
  } else if (ctx.cfg.contains("synth")) {
    spec_json = ctx.cfg.at("synth");
  } else {
    spec_json = json::object();
  }
  const ewi::SynthSpec spec = synth_from_json(spec_json, ctx.seed);
  const ewi::SynthData sd = ewi::generate(spec);

  OutDir out(ctx.out);
  ewi::io::save_evolution(out.path() / "x", sd.x);
  ewi::io::write_ohlc(out.path() / "ohlc.tsv", sd.bars);
  const fs::path truth = out.path() / "truth";
  fs::create_directories(truth);
  ewi::io::save_matrix(truth / "w.bin", sd.w_true);
  ewi::io::save_matrix(truth / "h.bin", sd.h_true);
  ewi::io::save_matrix(truth / "c.bin", sd.c_true);
  ewi::io::save_day_series(truth / "sigma.tsv", sd.sigma_true);
  {
    std::ofstream meta(truth / "meta.json");
    meta << synth_to_json(spec).dump(2) << '\n';
    meta.flush();
    if (!meta) throw ewi::DataError("cannot write truth/meta.json");
  }

  std::cout << "synth: " << sd.x.rows() << " rows x " << sd.x.cols()
            << " days, planted rank " << spec.k_true << ", alpha "
            << fmt_double(sd.alpha) << "\n";
  out.commit("synth", synth_to_json(spec), ctx.cfg);
  return 0;
}

struct ReportArgs {
  std::string sweep;
  std::vector<std::string> roc_curves, pr_curves;
};

std::string fmt3(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void render_sweep(std::ostream& os, const ewi::SweepTable& table) {
  // Blocks keyed by (k, delta, h); rows are indicators, columns alphas.
  std::set<std::tuple<int, int, int>> blocks;
  std::set<double> alphas;
  for (const auto& r : table.rows) {
    blocks.insert({r.k, r.delta, r.h});
    alphas.insert(r.alpha);
  }
  std::map<std::tuple<int, int, int, double, std::string>, const ewi::SweepRow*>
      cell;
  std::vector<std::string> kinds_seen;
  for (const auto& r : table.rows) {
    const std::string kind = ewi::to_string(r.kind);
    cell[{r.k, r.delta, r.h, r.alpha, kind}] = &r;
    if (std::find(kinds_seen.begin(), kinds_seen.end(), kind) ==
        kinds_seen.end())
      kinds_seen.push_back(kind);
  }

  os << "AUC PR by indicator (value, then margin over the random baseline "
        "epsilon)\n";
  for (const auto& [k, delta, h] : blocks) {
    os << "\nk=" << k << " delta=" << delta << " h=" << h << "\n";
    os << "  " << std::string(10, ' ');
    for (double alpha : alphas) {
      char head[32];
      std::snprintf(head, sizeof head, "alpha=%-12.3g", alpha);
      os << head;
    }
    os << "\n";
    // epsilon reads the same for every indicator; take the first present.
    os << "  epsilon   ";
    for (double alpha : alphas) {
      std::string text = "-";
      for (const auto& kind : kinds_seen) {
        const auto it = cell.find({k, delta, h, alpha, kind});
        if (it != cell.end()) {
          text = fmt3(it->second->epsilon);
          break;
        }
      }
      os << text << std::string(text.size() < 18 ? 18 - text.size() : 1, ' ');
    }
    os << "\n";
    for (const auto& kind : kinds_seen) {
      os << "  " << kind << std::string(kind.size() < 10 ? 10 - kind.size() : 1, ' ');
      for (double alpha : alphas) {
        std::string text = "-";
        const auto it = cell.find({k, delta, h, alpha, kind});
        if (it != cell.end()) {
          const auto& r = *it->second;
          text = fmt3(r.auc_pr) + " (" + fmt3(r.auc_pr_minus_eps) + ")";
        }
        os << text << std::string(text.size() < 18 ? 18 - text.size() : 1, ' ');
      }
      os << "\n";
    }
  }
}

double curve_area_trapezoid(const ewi::Curve& c) {
  double area = 0.0;
  for (size_t i = 1; i < c.points.size(); ++i)
    area += (c.points[i].x - c.points[i - 1].x) * 0.5 *
            (c.points[i].y + c.points[i - 1].y);
  return area;
}

double curve_area_steps(const ewi::Curve& c) {
  double area = 0.0;
  for (size_t i = 1; i < c.points.size(); ++i)
    area += (c.points[i].x - c.points[i - 1].x) * c.points[i].y;
  return area;
}

ewi::Curve load_curve(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ewi::DataError("cannot open curve file: " + path.string());
  ewi::Curve c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("threshold", 0) == 0) continue;
    double v[3];
    const char* p = line.c_str();
    char* end = nullptr;
    for (int i = 0; i < 3; ++i) {
      v[i] = std::strtod(p, &end);
      if (end == p)
        throw ewi::DataError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 3 numeric columns");
      p = end;
    }
    c.points.push_back({v[0], v[1], v[2]});
  }
  if (c.points.empty())
    throw ewi::DataError("curve file has no points: " + path.string());
  return c;
}

int cmd_report(const Ctx& ctx, const ReportArgs& a, const CLI::App& sub) {
  if (!sub.count("--sweep") && a.roc_curves.empty() && a.pr_curves.empty())
    throw ewi::ConfigError(
        "report needs --sweep and/or --roc-curve/--pr-curve inputs");

  std::ostringstream body;
  if (sub.count("--sweep")) {
    const ewi::SweepTable table = ewi::io::load_sweep_table(a.sweep);
    if (table.rows.empty()) throw ewi::DataError("sweep table is empty");
    render_sweep(body, table);
  }
  if (!a.roc_curves.empty() || !a.pr_curves.empty()) {
    body << "\nCurves\n";
    for (const auto& p : a.roc_curves) {
      const ewi::Curve c = load_curve(p);
      body << "  " << p << ": " << c.points.size() << " points, ROC area "
           << fmt3(curve_area_trapezoid(c)) << "\n";
    }
    for (const auto& p : a.pr_curves) {
      const ewi::Curve c = load_curve(p);
      body << "  " << p << ": " << c.points.size() << " points, PR area "
           << fmt3(curve_area_steps(c)) << "\n";
    }
  }

  std::cout << body.str();
  OutDir out(ctx.out);
  {
    std::ofstream rep(out.path() / "report.txt");
    rep << body.str();
    rep.flush();
    if (!rep) throw ewi::DataError("cannot write report.txt");
  }
  out.commit("report",
             {{"sweep", a.sweep},
              {"roc_curves", a.roc_curves},
              {"pr_curves", a.pr_curves}},
             ctx.cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Early-warning indicators for extreme volatility from transaction-graph "
      "snapshots"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "base random seed (default 42)");
  app.add_option("--out", out_dir, "output directory (must not exist yet)");
  app.add_option("--threads", threads, "worker threads for fold execution");
  app.footer(
      "Environment variables with the EWI_ prefix override config keys, e.g. "
      "EWI_SEED=7, EWI_MODEL_K=20, EWI_DATA_OHLC=prices.tsv.");

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "encode a ledger into an evolution matrix");
  ingest->fallthrough();
  ingest->add_option("--ledger", ingest_args.ledger, "line-delimited transaction file");
  ingest->add_option("--encoding", ingest_args.encoding, "node or edge");
  ingest->add_option("--min-tx", ingest_args.min_tx, "long-term filter: minimum transactions");
  ingest->add_option("--min-span", ingest_args.min_span, "long-term filter: minimum activity span, days");
  ingest->add_option("--day-begin", ingest_args.day_begin, "first day to encode");
  ingest->add_option("--day-end", ingest_args.day_end, "one past the last day to encode");

  LabelArgs label_args;
  auto* label = app.add_subcommand("label", "volatility series and extreme-event labels from OHLC prices");
  label->fallthrough();
  label->add_option("--ohlc", label_args.ohlc, "price table: day, open, high, low, close");
  label->add_option("--epoch", label_args.epoch, "ISO date of day 0, for dated price tables");
  label->add_option("--alpha", label_args.alpha, "extreme-event threshold");
  label->add_option("--horizon", label_args.h, "future segment length, days");

  DecomposeArgs dec_args;
  auto* decompose = app.add_subcommand("decompose", "robust factorization of an evolution matrix");
  decompose->fallthrough();
  decompose->add_option("--in", dec_args.in, "evolution matrix directory");
  decompose->add_option("--k", dec_args.k, "factor count");
  decompose->add_option("--lambda", dec_args.lambda, "encoding sparsity weight");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "fit the indicator model on a full matrix");
  train->fallthrough();
  train->add_option("--x", train_args.x, "evolution matrix directory");
  train->add_option("--ohlc", train_args.ohlc, "price table");
  train->add_option("--epoch", train_args.epoch, "ISO date of day 0");
  train->add_option("--k", train_args.k, "factor count");
  train->add_option("--delta", train_args.delta, "lag depth");
  train->add_option("--lambda", train_args.lambda, "encoding sparsity weight");
  train->add_option("--lambda-coeff", train_args.lambda_coeff, "coefficient sparsity weight");

  BacktestArgs bt_args;
  auto* backtest = app.add_subcommand("backtest", "walk-forward evaluation at one (alpha, h)");
  backtest->fallthrough();
  backtest->add_option("--x", bt_args.x, "evolution matrix directory");
  backtest->add_option("--ohlc", bt_args.ohlc, "price table");
  backtest->add_option("--epoch", bt_args.epoch, "ISO date of day 0");
  backtest->add_option("--alpha", bt_args.alpha, "extreme-event threshold");
  backtest->add_option("--horizon", bt_args.h, "future segment length, days");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "backtests over the (alpha, h, k, delta) grid");
  sweep->fallthrough();
  sweep->add_option("--x", sweep_args.x, "evolution matrix directory");
  sweep->add_option("--ohlc", sweep_args.ohlc, "price table");
  sweep->add_option("--epoch", sweep_args.epoch, "ISO date of day 0");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "ROC/PR curves from score and label files");
  evaluate->fallthrough();
  evaluate->add_option("--scores", eval_args.scores, "day\\tscore file")->required();
  evaluate->add_option("--labels", eval_args.labels, "day\\tlabel file")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate planted-structure data with known volatility");
  synth->fallthrough();
  synth->add_option("--spec", synth_args.spec, "JSON generator spec");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "render sweep tables and curves into a text summary");
  report->fallthrough();
  report->add_option("--sweep", report_args.sweep, "sweep.tsv from the sweep command");
  report->add_option("--roc-curve", report_args.roc_curves, "ROC curve file (repeatable)");
  report->add_option("--pr-curve", report_args.pr_curves, "PR curve file (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    Ctx ctx;
    if (!config_path.empty()) ctx.cfg = load_config_file(config_path);
    apply_env_overrides(ctx.cfg);
    ctx.seed = app.count("--seed") ? seed
                                   : cfg_get<std::uint64_t>(ctx.cfg, nullptr,
                                                            "seed", 42);
    ctx.threads =
        app.count("--threads") ? threads : cfg_get(ctx.cfg, nullptr, "threads", 1);
    if (ctx.threads < 1) throw ewi::ConfigError("threads must be >= 1");
    ctx.out = app.count("--out") ? out_dir
                                 : cfg_get<std::string>(ctx.cfg, nullptr, "out", "");

    if (ingest->parsed()) return cmd_ingest(ctx, ingest_args, *ingest);
    if (label->parsed()) return cmd_label(ctx, label_args, *label);
    if (decompose->parsed()) return cmd_decompose(ctx, dec_args, *decompose);
    if (train->parsed()) return cmd_train(ctx, train_args, *train);
    if (backtest->parsed()) return cmd_backtest(ctx, bt_args, *backtest);
    if (sweep->parsed()) return cmd_sweep(ctx, sweep_args, *sweep);
    if (evaluate->parsed()) return cmd_evaluate(ctx, eval_args);
    if (synth->parsed()) return cmd_synth(ctx, synth_args, *synth);
    if (report->parsed()) return cmd_report(ctx, report_args, *report);
    std::cerr << "error (usage): no subcommand\n";
    return kExitUsage;
  } catch (const ewi::ConfigError& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return kExitConfig;
  } catch (const ewi::DataError& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error (internal): " << e.what() << "\n";
    return kExitInternal;
  }
}
