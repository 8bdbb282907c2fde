#include "olfc/comm.hpp"

#include <algorithm>

namespace olfc {

std::vector<Inbox> build_inboxes(const NetworkTopology& topology, const Eigen::VectorXd& mu,
                                 const Eigen::VectorXd& phi, long round) {
  std::vector<Inbox> inboxes(static_cast<size_t>(topology.bus_count()));
  for (int i = 0; i < topology.bus_count(); ++i) {
    Inbox& box = inboxes[static_cast<size_t>(i)];
    for (int nb : topology.neighbors(i))
      box.push_back({topology.bus_id(nb), mu(nb), phi(nb), round});
    std::sort(box.begin(), box.end(),
              [](const NeighborMessage& a, const NeighborMessage& b) { return a.sender < b.sender; });
  }
  return inboxes;
}

ExchangeBus::ExchangeBus(const NetworkTopology& topology, CommConfig config)
    : topology_(&topology), config_(config), rng_(config.seed) {
  belief_.resize(static_cast<size_t>(topology.bus_count()));
  for (int i = 0; i < topology.bus_count(); ++i)
    belief_[static_cast<size_t>(i)].resize(topology.incident(i).size());
}

const std::vector<Inbox>& ExchangeBus::exchange_round(const Eigen::VectorXd& mu,
                                                      const Eigen::VectorXd& phi, long round) {
  history_.emplace_back(mu, phi);
  if (static_cast<long>(history_.size()) > static_cast<long>(config_.delay_rounds) + 1)
    history_.pop_front();
  const Eigen::VectorXd& mu_src = history_.front().first;
  const Eigen::VectorXd& phi_src = history_.front().second;

  // Drop decisions are drawn in canonical edge order so a fixed seed yields a
  // fixed delivery pattern regardless of caller structure.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = topology_->bus_count();
  inboxes_.assign(static_cast<size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    const auto& incident = topology_->incident(i);
    for (size_t slot = 0; slot < incident.size(); ++slot) {
      const int sender = incident[slot].other;
      const bool dropped =
          config_.drop_probability > 0.0 && unit(rng_) < config_.drop_probability;
      NeighborMessage& belief = belief_[static_cast<size_t>(i)][slot];
      if (!dropped) {
        belief = {topology_->bus_id(sender), mu_src(sender), phi_src(sender), round};
        if (log_)
          *log_ << round << "," << belief.sender << "," << topology_->bus_id(i) << "," << belief.mu
                << "," << belief.phi << "\n";
      } else if (!config_.replay_on_drop) {
        continue;
      } else if (round == 0) {
        // Nothing received yet; fall back to the initial publication.
        belief = {topology_->bus_id(sender), mu_src(sender), phi_src(sender), round};
      }
      NeighborMessage delivered = belief;
      delivered.round = round;
      inboxes_[static_cast<size_t>(i)].push_back(delivered);
    }
    std::sort(inboxes_[static_cast<size_t>(i)].begin(), inboxes_[static_cast<size_t>(i)].end(),
              [](const NeighborMessage& a, const NeighborMessage& b) { return a.sender < b.sender; });
  }
  ++next_round_;
  return inboxes_;
}

}  // namespace olfc
