#pragma once

#include <cstdint>
#include <string>

namespace splitwiper {

/// Lifecycle of one client: Idle -> Training -> Frozen, and for the client
/// named in an unlearning request, Frozen -> Unlearning -> Frozen. Frozen
/// clients reject training events; a BeginUnlearn for some other client is a
/// no-op (they remain silent). A frozen client may service gradient
/// exchanges (ServeGradientExchange) without leaving Frozen.
enum class ClientPhase : std::uint8_t { Idle = 0, Training = 1, Frozen = 2, Unlearning = 3 };

enum class ClientEventKind : std::uint8_t {
    BeginTraining,
    TrainEpoch,
    Freeze,
    BeginUnlearn,  // carries the id of the client the request targets
    ServeGradientExchange,
};

struct ClientEvent {
    ClientEventKind kind = ClientEventKind::BeginTraining;
    std::uint32_t target_client = 0;  // BeginUnlearn only

    static ClientEvent begin_training() { return {ClientEventKind::BeginTraining, 0}; }
    static ClientEvent train_epoch() { return {ClientEventKind::TrainEpoch, 0}; }
    static ClientEvent freeze() { return {ClientEventKind::Freeze, 0}; }
    static ClientEvent begin_unlearn(std::uint32_t target) {
        return {ClientEventKind::BeginUnlearn, target};
    }
    static ClientEvent serve_gradient_exchange() {
        return {ClientEventKind::ServeGradientExchange, 0};
    }
};

const char* client_phase_name(ClientPhase s);
const char* client_event_name(ClientEventKind k);

/// Applies one event; illegal (state, event) pairs raise ProtocolError
/// naming both.
ClientPhase client_state_step(std::uint32_t self_id, ClientPhase state,
                              const ClientEvent& event);

}  // namespace splitwiper
