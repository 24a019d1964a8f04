#include "splitwiper/transport.hpp"

#include <sstream>

#include <json.hpp>

#include "splitwiper/errors.hpp"

namespace splitwiper {

Transport::Transport(std::shared_ptr<CostLedger> ledger) : ledger_(std::move(ledger)) {}

void Transport::register_party(Party p) {
    std::lock_guard lock(mu_);
    parties_.insert(p);
}

bool Transport::registered(Party p) const {
    std::lock_guard lock(mu_);
    return parties_.contains(p);
}

void Transport::send(Party from, Party to, Message msg) {
    const std::size_t n = serialized_size(msg);  // validates the message
    std::lock_guard lock(mu_);
    if (!parties_.contains(from)) throw RoutingError("unregistered sender " + from.name());
    if (!parties_.contains(to)) throw RoutingError("unregistered receiver " + to.name());
    ledger_->add_bytes(from, to, n);
    log_.push_back({static_cast<std::uint64_t>(log_.size()), from, to,
                    message_variant_name(msg), n, ledger_->phase()});
    retained_.push_back(msg);
    queues_[{from, to}].push_back(std::move(msg));
}

Message Transport::receive(Party from, Party to) {
    std::lock_guard lock(mu_);
    auto& q = queues_[{from, to}];
    if (q.empty()) {
        throw RoutingError("no pending message " + from.name() + " -> " + to.name());
    }
    Message msg = std::move(q.front());
    q.pop_front();
    return msg;
}

std::size_t Transport::pending(Party from, Party to) const {
    std::lock_guard lock(mu_);
    const auto it = queues_.find({from, to});
    return it == queues_.end() ? 0 : it->second.size();
}

std::vector<TransportLogEntry> Transport::log() const {
    std::lock_guard lock(mu_);
    return log_;
}

std::string Transport::log_jsonl() const {
    std::ostringstream os;
    for (const TransportLogEntry& e : log()) {
        nlohmann::json j{{"seq", e.seq},
                         {"from", e.from.name()},
                         {"to", e.to.name()},
                         {"variant", e.variant},
                         {"bytes", e.bytes},
                         {"phase", phase_name(e.phase)}};
        os << j.dump() << "\n";
    }
    return os.str();
}

}  // namespace splitwiper
