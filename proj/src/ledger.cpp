#include "ewi/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ewi/errors.hpp"

namespace ewi {

namespace {

// Plain union-find over dense address indices.
class DisjointSets {
 public:
  int add() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

constexpr double kSatoshisPerBtc = 1e8;

// Resolves the transaction's single sending user; co-spent inputs must have
// been merged by the mapping. Returns nullopt for external inflow.
std::optional<int> sender_of(const TransactionEvent& ev,
                             const UserMapping& mapping) {
  if (ev.inputs.empty()) return std::nullopt;
  std::optional<int> sender;
  for (const auto& addr : ev.inputs) {
    const auto u = mapping.user_of(addr);
    if (!u) throw DataError("encode: unmapped input address '" + addr + "'");
    if (sender && *sender != *u)
      throw DataError("encode: mapping does not merge co-spent inputs of tx " +
                      ev.tx_id);
    sender = u;
  }
  return sender;
}

void check_range(DayRange r) {
  if (r.length() <= 0)
    throw std::invalid_argument("encode: empty day range");
}

}  // namespace

std::vector<std::string> EvolutionMatrix::row_labels() const {
  std::vector<std::string> out;
  if (encoding == Encoding::node) {
    out.reserve(row_users.size());
    for (int u : row_users) out.push_back(std::to_string(u));
  } else {
    out.reserve(row_pairs.size());
    for (const auto& [s, d] : row_pairs)
      out.push_back(std::to_string(s) + ">" + std::to_string(d));
  }
  return out;
}

UserMapping merge_addresses(std::span<const TransactionEvent> events) {
  std::unordered_map<std::string, int> index;  // address -> first-appearance slot
  std::vector<std::string> order;
  DisjointSets sets;

  auto slot = [&](const std::string& addr) {
    auto it = index.find(addr);
    if (it != index.end()) return it->second;
    const int s = sets.add();
    index.emplace(addr, s);
    order.push_back(addr);
    return s;
  };

  for (const auto& ev : events) {
    int first = -1;
    for (const auto& addr : ev.inputs) {
      const int s = slot(addr);
      if (first < 0)
        first = s;
      else
        sets.unite(first, s);
    }
    for (const auto& [addr, amount] : ev.outputs) slot(addr);
  }

  // Dense user ids in first-appearance order of each class.
  std::unordered_map<int, int> root_to_user;
  std::unordered_map<std::string, int> users;
  users.reserve(order.size());
  for (const auto& addr : order) {
    const int root = sets.find(index[addr]);
    const auto it =
        root_to_user.emplace(root, static_cast<int>(root_to_user.size())).first;
    users.emplace(addr, it->second);
  }
  return UserMapping(std::move(users));
}

std::vector<int> filter_long_term_users(std::span<const TransactionEvent> events,
                                        const UserMapping& mapping,
                                        const LongTermFilter& filter) {
  struct Stats {
    int tx_count = 0;
    int first_day = std::numeric_limits<int>::max();
    int last_day = std::numeric_limits<int>::min();
  };
  std::unordered_map<int, Stats> stats;

  std::set<int> touched;  // users involved in the current transaction
  for (const auto& ev : events) {
    touched.clear();
    for (const auto& addr : ev.inputs) {
      const auto u = mapping.user_of(addr);
      if (!u) throw DataError("filter: unmapped address '" + addr + "'");
      touched.insert(*u);
    }
    for (const auto& [addr, amount] : ev.outputs) {
      const auto u = mapping.user_of(addr);
      if (!u) throw DataError("filter: unmapped address '" + addr + "'");
      touched.insert(*u);
    }
    for (int u : touched) {
      auto& s = stats[u];
      s.tx_count += 1;
      s.first_day = std::min(s.first_day, ev.day);
      s.last_day = std::max(s.last_day, ev.day);
    }
  }

  std::vector<int> kept;
  for (const auto& [u, s] : stats) {
    if (s.tx_count >= filter.min_tx &&
        s.last_day - s.first_day >= filter.min_span &&
        s.first_day < filter.active_before)
      kept.push_back(u);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

namespace {

using SatMatrix =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

EvolutionMatrix finish(SatMatrix& sat, EvolutionMatrix&& x, DayRange range) {
  x.days.resize(range.length());
  for (int t = 0; t < range.length(); ++t) x.days[t] = range.begin + t;
  x.values = sat.cast<double>() / kSatoshisPerBtc;
  return std::move(x);
}

}  // namespace

EvolutionMatrix encode_snapshots(std::span<const TransactionEvent> events,
                                 const UserMapping& mapping,
                                 std::span<const int> users, Encoding encoding,
                                 DayRange day_range) {
  check_range(day_range);
  if (users.empty()) throw std::invalid_argument("encode: empty user universe");

  std::unordered_map<int, int> node_row;
  std::vector<int> sorted_users(users.begin(), users.end());
  std::sort(sorted_users.begin(), sorted_users.end());
  sorted_users.erase(std::unique(sorted_users.begin(), sorted_users.end()),
                     sorted_users.end());
  for (int i = 0; i < static_cast<int>(sorted_users.size()); ++i)
    node_row.emplace(sorted_users[i], i);

  auto in_universe = [&](int u) { return node_row.count(u) > 0; };

  if (encoding == Encoding::node) {
    EvolutionMatrix x;
    x.encoding = Encoding::node;
    x.row_users = sorted_users;
    SatMatrix sat = SatMatrix::Zero(static_cast<Eigen::Index>(sorted_users.size()),
                                    day_range.length());
    for (const auto& ev : events) {
      if (ev.day < day_range.begin || ev.day >= day_range.end) continue;
      const auto sender = sender_of(ev, mapping);
      if (!sender || !in_universe(*sender)) continue;
      for (const auto& [addr, amount] : ev.outputs) {
        const auto recipient = mapping.user_of(addr);
        if (!recipient) throw DataError("encode: unmapped output address '" + addr + "'");
        if (*recipient == *sender || !in_universe(*recipient)) continue;
        sat(node_row[*recipient], ev.day - day_range.begin) += amount;
      }
    }
    return finish(sat, std::move(x), day_range);
  }

  // Edge mode: discover the ordered-pair universe inside the range first.
  std::set<std::pair<int, int>> pair_set;
  for (const auto& ev : events) {
    if (ev.day < day_range.begin || ev.day >= day_range.end) continue;
    const auto sender = sender_of(ev, mapping);
    if (!sender || !in_universe(*sender)) continue;
    for (const auto& [addr, amount] : ev.outputs) {
      const auto recipient = mapping.user_of(addr);
      if (!recipient) throw DataError("encode: unmapped output address '" + addr + "'");
      if (*recipient == *sender || !in_universe(*recipient)) continue;
      pair_set.insert({*sender, *recipient});
    }
  }
  std::vector<std::pair<int, int>> pairs(pair_set.begin(), pair_set.end());
  return encode_edges_fixed(events, mapping, pairs, day_range);
}

EvolutionMatrix encode_edges_fixed(std::span<const TransactionEvent> events,
                                   const UserMapping& mapping,
                                   std::span<const std::pair<int, int>> pairs,
                                   DayRange day_range) {
  check_range(day_range);
  EvolutionMatrix x;
  x.encoding = Encoding::edge;
  x.row_pairs.assign(pairs.begin(), pairs.end());

  std::map<std::pair<int, int>, int> row;
  for (int i = 0; i < static_cast<int>(x.row_pairs.size()); ++i)
    row.emplace(x.row_pairs[i], i);

  SatMatrix sat = SatMatrix::Zero(static_cast<Eigen::Index>(x.row_pairs.size()),
                                  day_range.length());
  for (const auto& ev : events) {
    if (ev.day < day_range.begin || ev.day >= day_range.end) continue;
    const auto sender = sender_of(ev, mapping);
    if (!sender) continue;
    for (const auto& [addr, amount] : ev.outputs) {
      const auto recipient = mapping.user_of(addr);
      if (!recipient) throw DataError("encode: unmapped output address '" + addr + "'");
      if (*recipient == *sender) continue;
      const auto it = row.find({*sender, *recipient});
      if (it == row.end()) continue;  // outside the fixed universe: dropped
      sat(it->second, ev.day - day_range.begin) += amount;
    }
  }
  return finish(sat, std::move(x), day_range);
}

DaySeries daily_volume(const EvolutionMatrix& x) {
  DaySeries v;
  v.first_day = x.days.empty() ? 0 : x.days.front();
  v.values = x.values.colwise().sum().transpose();
  return v;
}

std::vector<TransactionEvent> read_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ledger file: " + path);

  std::vector<TransactionEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad ledger record: " + e.what());
    }
    try {
      TransactionEvent ev;
      ev.tx_id = j.at("tx_id").get<std::string>();
      ev.day = j.at("day").get<int>();
      for (const auto& a : j.at("inputs")) ev.inputs.push_back(a.get<std::string>());
      for (const auto& o : j.at("outputs")) {
        const auto addr = o.at(0).get<std::string>();
        const auto amount = o.at(1).get<std::int64_t>();
        if (amount < 0)
          throw DataError(path + ":" + std::to_string(line_no) +
                          ": negative amount");
        ev.outputs.emplace_back(addr, amount);
      }
      events.push_back(std::move(ev));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad ledger record: " + e.what());
    }
  }
  return events;
}

}  // namespace ewi
