#include "splitwiper/client_state.hpp"

#include "splitwiper/errors.hpp"

namespace splitwiper {

const char* client_phase_name(ClientPhase s) {
    switch (s) {
        case ClientPhase::Idle: return "Idle";
        case ClientPhase::Training: return "Training";
        case ClientPhase::Frozen: return "Frozen";
        default: return "Unlearning";
    }
}

const char* client_event_name(ClientEventKind k) {
    switch (k) {
        case ClientEventKind::BeginTraining: return "BeginTraining";
        case ClientEventKind::TrainEpoch: return "TrainEpoch";
        case ClientEventKind::Freeze: return "Freeze";
        case ClientEventKind::BeginUnlearn: return "BeginUnlearn";
        default: return "ServeGradientExchange";
    }
}

ClientPhase client_state_step(std::uint32_t self_id, ClientPhase state,
                              const ClientEvent& event) {
    switch (event.kind) {
        case ClientEventKind::BeginTraining:
            if (state == ClientPhase::Idle) return ClientPhase::Training;
            break;
        case ClientEventKind::TrainEpoch:
            if (state == ClientPhase::Training || state == ClientPhase::Unlearning) {
                return state;
            }
            break;
        case ClientEventKind::Freeze:
            if (state == ClientPhase::Training || state == ClientPhase::Unlearning) {
                return ClientPhase::Frozen;
            }
            break;
        case ClientEventKind::BeginUnlearn:
            if (event.target_client != self_id) return state;  // others remain silent
            if (state == ClientPhase::Frozen) return ClientPhase::Unlearning;
            break;
        case ClientEventKind::ServeGradientExchange:
            if (state == ClientPhase::Frozen) return state;
            break;
    }
    throw ProtocolError("client " + std::to_string(self_id) + ": illegal event " +
                        client_event_name(event.kind) + " in state " +
                        client_phase_name(state));
}

}  // namespace splitwiper
