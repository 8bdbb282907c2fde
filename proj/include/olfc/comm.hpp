#pragma once

#include <cstdint>
#include <deque>
#include <ostream>
#include <random>
#include <vector>

#include "olfc/network.hpp"

namespace olfc {

/// One neighbor-to-neighbor payload: the sender's price estimate and virtual
/// phase. The round is the simulation step that delivered it; under delay the
/// values inside are older than the round.
struct NeighborMessage {
  BusId sender = 0;
  double mu = 0.0;
  double phi = 0.0;
  long round = 0;
};

/// Messages received by one bus in one round, sorted by sender id.
using Inbox = std::vector<NeighborMessage>;

struct CommConfig {
  int delay_rounds = 0;         // uniform staleness, in integrator steps
  double drop_probability = 0.0;  // per directed message per round
  bool replay_on_drop = false;  // deliver the last received value instead
  std::uint64_t seed = 0;

  bool ideal() const { return delay_rounds == 0 && drop_probability == 0.0; }
};

/// Ideal synchronous exchange: every bus receives its neighbors' current
/// (mu, phi). Pure function; used directly for stage evaluations when the
/// channel is ideal.
std::vector<Inbox> build_inboxes(const NetworkTopology& topology, const Eigen::VectorXd& mu,
                                 const Eigen::VectorXd& phi, long round);

/// Stateful channel handling delay, drops and replay. One instance per run;
/// consumes rounds in order.
class ExchangeBus {
public:
  ExchangeBus(const NetworkTopology& topology, CommConfig config);

  /// Publishes the round's values and builds every inbox. With delay k the
  /// delivered values are the publication of round max(0, round - k); drops
  /// remove a directed message for the whole round (or substitute the last
  /// received value when replay is enabled).
  const std::vector<Inbox>& exchange_round(const Eigen::VectorXd& mu, const Eigen::VectorXd& phi,
                                           long round);

  const std::vector<Inbox>& inboxes() const { return inboxes_; }

  /// Optional delivery log; one "round,sender,recipient,mu,phi" line each.
  void set_log(std::ostream* log) { log_ = log; }

private:
  const NetworkTopology* topology_;
  CommConfig config_;
  std::mt19937_64 rng_;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history_;
  std::vector<Inbox> inboxes_;
  // Last value each recipient actually received from each incident neighbor,
  // indexed like NetworkTopology::incident.
  std::vector<std::vector<NeighborMessage>> belief_;
  long next_round_ = 0;
  std::ostream* log_ = nullptr;
};

}  // namespace olfc
