#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "splitwiper/tensor.hpp"

namespace splitwiper {

/// Label payload of an IntermediateBatch. Values are class indices either as
/// the client holds them (Raw), after the client's keyed permutation
/// (Anonymized), or omitted entirely (Absent).
enum class LabelTag : std::uint8_t { Raw = 0, Anonymized = 1, Absent = 2 };

struct LabelSet {
    LabelTag tag = LabelTag::Absent;
    std::vector<std::uint32_t> values;

    static LabelSet raw(std::vector<std::uint32_t> v) { return {LabelTag::Raw, std::move(v)}; }
    static LabelSet anonymized(std::vector<std::uint32_t> v) {
        return {LabelTag::Anonymized, std::move(v)};
    }
    static LabelSet absent() { return {LabelTag::Absent, {}}; }
};

/// Cut-layer activations (tensor T) plus labels, client -> server.
struct IntermediateBatch {
    std::uint32_t client_id = 0;
    Tensor activations;
    LabelSet labels;
};

/// Server logits for one batch of a client's cached rows, server -> client.
/// batch_tag is the chunk index into the client's cached row order.
struct ServerOutput {
    std::uint32_t client_id = 0;
    std::uint32_t batch_tag = 0;
    Tensor logits;
};

/// A gradient tensor crossing the cut: either the loss gradient a client
/// computed for a ServerOutput (same shape, same batch_tag), or the server's
/// gradient G at its first layer heading back to a client.
struct OutputGradient {
    std::uint32_t client_id = 0;
    std::uint32_t batch_tag = 0;
    Tensor grad;
};

enum class ControlKind : std::uint8_t { BeginUnlearn = 0, Done = 1 };

struct Control {
    std::uint32_t client_id = 0;
    ControlKind kind = ControlKind::Done;
};

using Message = std::variant<IntermediateBatch, ServerOutput, OutputGradient, Control>;

const char* message_variant_name(const Message& msg);

/// Wire format, little-endian: u8 variant tag (0=IntermediateBatch,
/// 1=ServerOutput, 2=OutputGradient, 3=Control), u32 client_id, then the
/// variant payload. Tensors serialize as u32 rows, u32 cols, rows*cols f64
/// row-major. Labels serialize as u8 tag, u32 count, count u32 entries.
/// ServerOutput/OutputGradient carry u32 batch_tag before their tensor;
/// Control carries a u8 kind.
std::vector<std::uint8_t> serialize_message(const Message& msg);
Message deserialize_message(std::span<const std::uint8_t> bytes);

/// Size of the serialized form without materializing it.
std::size_t serialized_size(const Message& msg);

}  // namespace splitwiper
