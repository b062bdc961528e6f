#ifndef EWI_LEDGER_HPP
#define EWI_LEDGER_HPP

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ewi/day_series.hpp"

namespace ewi {

// One normalized ledger entry. Amounts are satoshis so accumulation stays
// exact until matrix encoding. Empty inputs mark external inflow
// (coinbase-style events).
struct TransactionEvent {
  std::string tx_id;
  int day = 0;
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, std::int64_t>> outputs;
};

// Address -> dense user id surjection. Addresses ever co-spent as inputs of
// one transaction share a user (transitively); ids follow first appearance
// in the event stream.
class UserMapping {
 public:
  UserMapping() = default;
  explicit UserMapping(std::unordered_map<std::string, int> users)
      : users_(std::move(users)) {
    for (const auto& [addr, id] : users_) count_ = std::max(count_, id + 1);
  }

  int user_count() const { return count_; }
  std::optional<int> user_of(const std::string& addr) const {
    auto it = users_.find(addr);
    if (it == users_.end()) return std::nullopt;
    return it->second;
  }
  const std::unordered_map<std::string, int>& addresses() const {
    return users_;
  }

 private:
  std::unordered_map<std::string, int> users_;
  int count_ = 0;
};

enum class Encoding { node, edge };

// Half-open day interval [begin, end).
struct DayRange {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
};

// Dense M x T snapshot matrix: column t encodes the events of days[t], rows
// are users (node encoding) or ordered user pairs (edge encoding), entries
// are BTC received / transferred and are always finite and >= 0.
struct EvolutionMatrix {
  Eigen::MatrixXd values;
  Encoding encoding = Encoding::node;
  std::vector<int> row_users;                        // node rows
  std::vector<std::pair<int, int>> row_pairs;        // edge rows
  std::vector<int> days;                             // per column

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  std::vector<std::string> row_labels() const;
};

UserMapping merge_addresses(std::span<const TransactionEvent> events);

// Long-term user filter: transaction count >= min_tx, activity span
// >= min_span days, first activity strictly before active_before. Counts and
// spans are computed over the full event range. Returns sorted user ids.
struct LongTermFilter {
  int min_tx = 100;
  int min_span = 600;
  int active_before = std::numeric_limits<int>::max();
};
std::vector<int> filter_long_term_users(std::span<const TransactionEvent> events,
                                        const UserMapping& mapping,
                                        const LongTermFilter& filter = {});

// Node mode: entry (i, t) is BTC user i received from other in-universe
// users that day. Edge mode: entry (i, t) is BTC moved along ordered pair i;
// the pair universe is discovered from the encoded range. Self-transfers are
// excluded everywhere.
EvolutionMatrix encode_snapshots(std::span<const TransactionEvent> events,
                                 const UserMapping& mapping,
                                 std::span<const int> users, Encoding encoding,
                                 DayRange day_range);

// Edge encoding against a fixed pair universe; flows on pairs outside it are
// dropped.
EvolutionMatrix encode_edges_fixed(std::span<const TransactionEvent> events,
                                   const UserMapping& mapping,
                                   std::span<const std::pair<int, int>> pairs,
                                   DayRange day_range);

// V_b(t): column sums, the total BTC moved between in-universe users per day.
DaySeries daily_volume(const EvolutionMatrix& x);

// Line-delimited ledger file: one JSON object per line with fields tx_id,
// day, inputs, outputs (pairs of [address, satoshis]).
std::vector<TransactionEvent> read_ledger(const std::string& path);

}  // namespace ewi

#endif  // EWI_LEDGER_HPP
