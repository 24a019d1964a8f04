#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "splitwiper/ledger.hpp"
#include "splitwiper/message.hpp"
#include "splitwiper/party.hpp"

namespace splitwiper {

struct TransportLogEntry {
    std::uint64_t seq = 0;
    Party from;
    Party to;
    std::string variant;
    std::uint64_t bytes = 0;
    Phase phase = Phase::Train;
};

/// In-memory lossless transport with FIFO delivery per (from, to) pair.
/// Every send charges the ledger's byte counter for exactly the serialized
/// size of the message and appends one log entry, so ledger bytes and log
/// bytes always agree.
class Transport {
public:
    explicit Transport(std::shared_ptr<CostLedger> ledger);

    void register_party(Party p);
    bool registered(Party p) const;

    void send(Party from, Party to, Message msg);
    Message receive(Party from, Party to);
    std::size_t pending(Party from, Party to) const;

    std::vector<TransportLogEntry> log() const;

    /// One JSON object per line: {seq, from, to, variant, bytes, phase}.
    std::string log_jsonl() const;

    /// Every message ever sent, in send order, for log inspection (label
    /// hygiene audits). Indexes line up with log().
    const std::vector<Message>& retained_messages() const { return retained_; }

private:
    std::shared_ptr<CostLedger> ledger_;
    mutable std::mutex mu_;
    std::set<Party> parties_;
    std::vector<TransportLogEntry> log_;
    std::vector<Message> retained_;
    std::map<std::pair<Party, Party>, std::deque<Message>> queues_;
};

}  // namespace splitwiper
