#include "ewi/matrix_io.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ewi/errors.hpp"

namespace ewi::io {

namespace {

constexpr char kMagic[8] = {'E', 'W', 'I', 'M', 'A', 'T', 'R', 'X'};

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write file: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open file: " + path.string());
  return in;
}

void flush_or_throw(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

// Splits on tabs, commas, and space runs; carriage returns are dropped so
// CRLF files parse cleanly.
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == '\r') continue;
    if (ch == '\t' || ch == ',' || ch == ' ') {
      if (!cur.empty()) fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) fields.push_back(std::move(cur));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) return false;
  // ERANGE underflow still yields a usable (sub)normal value; reject only
  // overflow.
  return !(errno == ERANGE && std::abs(out) == HUGE_VAL);
}

bool parse_int(const std::string& s, long& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtol(s.c_str(), &end, 10);
  return end == s.c_str() + s.size() && !s.empty() && errno == 0;
}

// ISO calendar date -> sys_days; strict "YYYY-MM-DD" form.
std::optional<std::chrono::sys_days> parse_date(const std::string& s) {
  int y = 0, m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3)
    return std::nullopt;
  const std::chrono::year_month_day ymd{
      std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
      std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

[[noreturn]] void bad_line(const std::filesystem::path& path, int line_no,
                           const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols))
    throw DataError("model archive: matrix shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  return m;
}

}  // namespace

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path, true);
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                 static_cast<std::uint64_t>(m.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  const RowMajorMatrix tmp = m;
  out.write(reinterpret_cast<const char*>(tmp.data()),
            static_cast<std::streamsize>(sizeof(double) * tmp.size()));
  flush_or_throw(out, path);
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  char magic[8];
  std::uint64_t dims[2];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("not a matrix file: " + path.string());
  constexpr std::uint64_t kMaxSide = 1ull << 32;
  if (dims[0] >= kMaxSide || dims[1] >= kMaxSide)
    throw DataError("matrix dimensions out of range: " + path.string());
  RowMajorMatrix tmp(static_cast<Eigen::Index>(dims[0]),
                     static_cast<Eigen::Index>(dims[1]));
  in.read(reinterpret_cast<char*>(tmp.data()),
          static_cast<std::streamsize>(sizeof(double) * tmp.size()));
  if (!in) throw DataError("truncated matrix file: " + path.string());
  return tmp;
}

void save_matrix_tsv(const std::filesystem::path& path,
                     const Eigen::MatrixXd& m) {
  auto out = open_out(path, false);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << fmt17(m(r, c));
    }
    out << '\n';
  }
  flush_or_throw(out, path);
}

Eigen::MatrixXd load_matrix_tsv(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double v;
      if (!parse_double(f, v)) bad_line(path, line_no, "bad number '" + f + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      bad_line(path, line_no, "ragged row");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
  return m;
}

void save_evolution(const std::filesystem::path& dir,
                    const EvolutionMatrix& x) {
  std::filesystem::create_directories(dir);
  save_matrix(dir / "X.bin", x.values);

  auto rows_out = open_out(dir / "rows.tsv", false);
  for (const auto& label : x.row_labels()) rows_out << label << '\n';
  flush_or_throw(rows_out, dir / "rows.tsv");

  auto days_out = open_out(dir / "days.tsv", false);
  for (int d : x.days) days_out << d << '\n';
  flush_or_throw(days_out, dir / "days.tsv");

  nlohmann::json meta;
  meta["format"] = "ewi-evolution/1";
  meta["encoding"] = x.encoding == Encoding::node ? "node" : "edge";
  meta["rows"] = x.rows();
  meta["cols"] = x.cols();
  auto meta_out = open_out(dir / "meta.json", false);
  meta_out << meta.dump(2) << '\n';
  flush_or_throw(meta_out, dir / "meta.json");
}

EvolutionMatrix load_evolution(const std::filesystem::path& dir) {
  nlohmann::json meta;
  {
    auto in = open_in(dir / "meta.json", false);
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw DataError((dir / "meta.json").string() + ": " + e.what());
    }
  }
  if (meta.value("format", "") != "ewi-evolution/1")
    throw DataError(dir.string() + ": not an evolution matrix directory");

  EvolutionMatrix x;
  const auto enc = meta.at("encoding").get<std::string>();
  if (enc == "node")
    x.encoding = Encoding::node;
  else if (enc == "edge")
    x.encoding = Encoding::edge;
  else
    throw DataError(dir.string() + ": unknown encoding '" + enc + "'");

  x.values = load_matrix(dir / "X.bin");

  {
    auto in = open_in(dir / "rows.tsv", false);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto fields = split_fields(line);
      if (fields.empty()) continue;
      const auto& label = fields.front();
      if (x.encoding == Encoding::node) {
        long u;
        if (!parse_int(label, u))
          bad_line(dir / "rows.tsv", line_no, "bad user id '" + label + "'");
        x.row_users.push_back(static_cast<int>(u));
      } else {
        const auto sep = label.find('>');
        long s, d;
        if (sep == std::string::npos || !parse_int(label.substr(0, sep), s) ||
            !parse_int(label.substr(sep + 1), d))
          bad_line(dir / "rows.tsv", line_no, "bad pair label '" + label + "'");
        x.row_pairs.emplace_back(static_cast<int>(s), static_cast<int>(d));
      }
    }
  }

  {
    auto in = open_in(dir / "days.tsv", false);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto fields = split_fields(line);
      if (fields.empty()) continue;
      long d;
      if (!parse_int(fields.front(), d))
        bad_line(dir / "days.tsv", line_no, "bad day '" + fields.front() + "'");
      x.days.push_back(static_cast<int>(d));
    }
  }

  const auto row_count = x.encoding == Encoding::node ? x.row_users.size()
                                                      : x.row_pairs.size();
  if (static_cast<Eigen::Index>(row_count) != x.values.rows() ||
      static_cast<Eigen::Index>(x.days.size()) != x.values.cols())
    throw DataError(dir.string() + ": sidecar sizes disagree with X.bin");
  return x;
}

std::vector<OhlcBar> read_ohlc(const std::filesystem::path& path,
                               const std::optional<std::string>& epoch) {
  std::optional<std::chrono::sys_days> epoch_day;
  if (epoch) {
    epoch_day = parse_date(*epoch);
    if (!epoch_day) throw ConfigError("bad epoch date: " + *epoch);
  }

  auto in = open_in(path, false);
  std::vector<OhlcBar> bars;
  std::map<int, int> seen;  // day -> line, duplicate detection
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() != 5) bad_line(path, line_no, "expected 5 columns");

    double o, h, l, c;
    const bool prices_ok = parse_double(fields[1], o) &&
                           parse_double(fields[2], h) &&
                           parse_double(fields[3], l) &&
                           parse_double(fields[4], c);
    if (!prices_ok) {
      if (line_no == 1) continue;  // header row
      bad_line(path, line_no, "bad price field");
    }

    OhlcBar bar;
    long day_index;
    if (parse_int(fields[0], day_index)) {
      bar.day = static_cast<int>(day_index);
    } else if (const auto date = parse_date(fields[0])) {
      if (!epoch_day)
        bad_line(path, line_no, "calendar dates require an epoch date");
      bar.day = static_cast<int>((*date - *epoch_day).count());
    } else {
      bad_line(path, line_no, "bad day field '" + fields[0] + "'");
    }

    bar.open = o;
    bar.high = h;
    bar.low = l;
    bar.close = c;
    const auto [it, fresh] = seen.emplace(bar.day, line_no);
    if (!fresh)
      bad_line(path, line_no,
               "duplicate day " + std::to_string(bar.day) + " (first at line " +
                   std::to_string(it->second) + ")");
    bars.push_back(bar);
  }
  std::sort(bars.begin(), bars.end(),
            [](const OhlcBar& a, const OhlcBar& b) { return a.day < b.day; });
  return bars;
}

void write_ohlc(const std::filesystem::path& path,
                std::span<const OhlcBar> bars) {
  auto out = open_out(path, false);
  out << "day\topen\thigh\tlow\tclose\n";
  for (const auto& b : bars)
    out << b.day << '\t' << fmt17(b.open) << '\t' << fmt17(b.high) << '\t'
        << fmt17(b.low) << '\t' << fmt17(b.close) << '\n';
  flush_or_throw(out, path);
}

void save_day_values(const std::filesystem::path& path,
                     std::span<const int> days,
                     std::span<const double> values) {
  if (days.size() != values.size())
    throw std::invalid_argument("save_day_values: size mismatch");
  auto out = open_out(path, false);
  for (size_t i = 0; i < days.size(); ++i)
    out << days[i] << '\t' << fmt17(values[i]) << '\n';
  flush_or_throw(out, path);
}

std::vector<std::pair<int, double>> load_day_values(
    const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::vector<std::pair<int, double>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() != 2) bad_line(path, line_no, "expected 2 columns");
    long day;
    double value;
    if (!parse_int(fields[0], day))
      bad_line(path, line_no, "bad day '" + fields[0] + "'");
    if (!parse_double(fields[1], value))
      bad_line(path, line_no, "bad value '" + fields[1] + "'");
    out.emplace_back(static_cast<int>(day), value);
  }
  return out;
}

void save_day_series(const std::filesystem::path& path, const DaySeries& s) {
  std::vector<int> days(static_cast<size_t>(s.size()));
  for (int i = 0; i < s.size(); ++i) days[static_cast<size_t>(i)] = s.first_day + i;
  save_day_values(path, days,
                  {s.values.data(), static_cast<size_t>(s.values.size())});
}

DaySeries load_day_series(const std::filesystem::path& path) {
  const auto rows = load_day_values(path);
  if (rows.empty()) throw DataError("empty series file: " + path.string());
  int lo = rows.front().first, hi = rows.front().first;
  for (const auto& [day, value] : rows) {
    lo = std::min(lo, day);
    hi = std::max(hi, day);
  }
  DaySeries s;
  s.first_day = lo;
  s.values = Eigen::VectorXd::Constant(hi - lo + 1,
                                       std::numeric_limits<double>::quiet_NaN());
  for (const auto& [day, value] : rows) s.values(day - lo) = value;
  return s;
}

void save_scores(const std::filesystem::path& path, const ScoredLabels& sl) {
  save_day_values(path, sl.anchors, sl.scores);
}

void save_labels(const std::filesystem::path& path, const ScoredLabels& sl) {
  auto out = open_out(path, false);
  for (size_t i = 0; i < sl.anchors.size(); ++i)
    out << sl.anchors[i] << '\t' << int(sl.labels[i]) << '\n';
  flush_or_throw(out, path);
}

void save_labels(const std::filesystem::path& path,
                 const GroundTruthLabels& gt) {
  auto out = open_out(path, false);
  for (size_t i = 0; i < gt.anchors.size(); ++i)
    out << gt.anchors[i] << '\t' << int(gt.labels[i]) << '\n';
  flush_or_throw(out, path);
}

ScoredLabels load_scored(const std::filesystem::path& scores_path,
                         const std::filesystem::path& labels_path) {
  const auto score_rows = load_day_values(scores_path);
  const auto label_rows = load_day_values(labels_path);

  std::map<int, std::uint8_t> labels;
  for (const auto& [day, value] : label_rows) {
    if (value != 0.0 && value != 1.0)
      throw DataError(labels_path.string() + ": label for day " +
                      std::to_string(day) + " is not 0/1");
    labels[day] = static_cast<std::uint8_t>(value);
  }

  ScoredLabels sl;
  for (const auto& [day, score] : score_rows) {
    const auto it = labels.find(day);
    if (it == labels.end())
      throw DataError("no label for scored day " + std::to_string(day));
    sl.anchors.push_back(day);
    sl.scores.push_back(score);
    sl.labels.push_back(it->second);
  }
  return sl;
}

void save_curve(const std::filesystem::path& path, const Curve& c) {
  auto out = open_out(path, false);
  out << "threshold\tx\ty\n";
  for (const auto& p : c.points)
    out << fmt17(p.threshold) << '\t' << fmt17(p.x) << '\t' << fmt17(p.y)
        << '\n';
  flush_or_throw(out, path);
}

void save_metrics(const std::filesystem::path& path,
                  std::span<const std::pair<std::string, std::string>> kv) {
  auto out = open_out(path, false);
  for (const auto& [key, value] : kv) out << key << '\t' << value << '\n';
  flush_or_throw(out, path);
}

void save_model(const std::filesystem::path& path, const ModelArchive& m) {
  nlohmann::json j;
  j["format"] = "ewi-model/1";
  j["k"] = m.model.k;
  j["delta"] = m.model.delta;
  j["lambda_enc"] = m.model.lambda_enc;
  j["lambda_coeff"] = m.model.lambda_coeff;
  j["w"] = matrix_to_json(m.model.W);
  j["coeff"] = matrix_to_json(m.model.coeff);
  j["train_days"] = {{"begin", m.train_days.begin}, {"end", m.train_days.end}};
  auto out = open_out(path, false);
  out << j.dump(2) << '\n';
  flush_or_throw(out, path);
}

ModelArchive load_model(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    if (j.value("format", "") != "ewi-model/1")
      throw DataError(path.string() + ": not a model archive");
    ModelArchive m;
    m.model.k = j.at("k").get<int>();
    m.model.delta = j.at("delta").get<int>();
    m.model.lambda_enc = j.at("lambda_enc").get<double>();
    m.model.lambda_coeff = j.at("lambda_coeff").get<double>();
    m.model.W = matrix_from_json(j.at("w"));
    m.model.coeff = matrix_from_json(j.at("coeff"));
    m.train_days.begin = j.at("train_days").at("begin").get<int>();
    m.train_days.end = j.at("train_days").at("end").get<int>();
    if (m.model.W.cols() != m.model.k || m.model.coeff.rows() != m.model.k ||
        m.model.coeff.cols() != m.model.delta)
      throw DataError(path.string() + ": factor shapes disagree with k/delta");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_sweep_table(const std::filesystem::path& path, const SweepTable& t) {
  auto out = open_out(path, false);
  out << "indicator\tk\tdelta\talpha\th\tn\tpositives\tepsilon\tauc_roc\t"
         "auc_pr\tauc_pr_minus_eps\tfolds_used\tfolds_degenerate\n";
  for (const auto& r : t.rows)
    out << to_string(r.kind) << '\t' << r.k << '\t' << r.delta << '\t'
        << fmt17(r.alpha) << '\t' << r.h << '\t' << r.n << '\t' << r.positives
        << '\t' << fmt17(r.epsilon) << '\t' << fmt17(r.auc_roc) << '\t'
        << fmt17(r.auc_pr) << '\t' << fmt17(r.auc_pr_minus_eps) << '\t'
        << r.folds_used << '\t' << r.folds_degenerate << '\n';
  flush_or_throw(out, path);
}

SweepTable load_sweep_table(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  SweepTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.front() == "indicator") continue;
    if (fields.size() != 13) bad_line(path, line_no, "expected 13 columns");
    SweepRow r;
    long k, delta, h, n, positives, used, degenerate;
    const bool ok = parse_int(fields[1], k) && parse_int(fields[2], delta) &&
                    parse_double(fields[3], r.alpha) &&
                    parse_int(fields[4], h) && parse_int(fields[5], n) &&
                    parse_int(fields[6], positives) &&
                    parse_double(fields[7], r.epsilon) &&
                    parse_double(fields[8], r.auc_roc) &&
                    parse_double(fields[9], r.auc_pr) &&
                    parse_double(fields[10], r.auc_pr_minus_eps) &&
                    parse_int(fields[11], used) &&
                    parse_int(fields[12], degenerate);
    if (!ok) bad_line(path, line_no, "bad sweep row");
    r.kind = indicator_kind_from(fields[0]);
    r.k = static_cast<int>(k);
    r.delta = static_cast<int>(delta);
    r.h = static_cast<int>(h);
    r.n = static_cast<int>(n);
    r.positives = static_cast<int>(positives);
    r.folds_used = static_cast<int>(used);
    r.folds_degenerate = static_cast<int>(degenerate);
    t.rows.push_back(r);
  }
  return t;
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const auto got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace ewi::io
