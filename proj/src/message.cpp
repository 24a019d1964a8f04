#include "splitwiper/message.hpp"

#include <cstring>

#include "splitwiper/errors.hpp"

namespace splitwiper {

const char* message_variant_name(const Message& msg) {
    switch (msg.index()) {
        case 0: return "IntermediateBatch";
        case 1: return "ServerOutput";
        case 2: return "OutputGradient";
        default: return "Control";
    }
}

namespace {

struct Writer {
    std::vector<std::uint8_t> out;

    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out.insert(out.end(), p, p + 4);
    }
    void tensor(const Tensor& t) {
        u32(static_cast<std::uint32_t>(t.rows()));
        u32(static_cast<std::uint32_t>(t.cols()));
        const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
        out.insert(out.end(), p, p + t.size() * sizeof(double));
    }
    void labels(const LabelSet& l) {
        u8(static_cast<std::uint8_t>(l.tag));
        u32(static_cast<std::uint32_t>(l.values.size()));
        for (std::uint32_t v : l.values) u32(v);
    }
};

struct Reader {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > in.size()) throw FormatError("message truncated");
    }
    std::uint8_t u8() {
        need(1);
        return in[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, in.data() + pos, 4);
        pos += 4;
        return v;
    }
    Tensor tensor() {
        const std::uint32_t rows = u32();
        const std::uint32_t cols = u32();
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        need(n * sizeof(double));
        std::vector<double> data(n);
        std::memcpy(data.data(), in.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        return Tensor(rows, cols, std::move(data));
    }
    LabelSet labels() {
        const std::uint8_t tag = u8();
        if (tag > 2) throw FormatError("unknown label tag");
        const std::uint32_t count = u32();
        std::vector<std::uint32_t> values(count);
        for (auto& v : values) v = u32();
        return {static_cast<LabelTag>(tag), std::move(values)};
    }
};

void validate(const Message& msg) {
    if (const auto* ib = std::get_if<IntermediateBatch>(&msg)) {
        if (ib->labels.tag != LabelTag::Absent &&
            ib->labels.values.size() != ib->activations.rows()) {
            throw ShapeError("label count does not match activation rows");
        }
        if (ib->labels.tag == LabelTag::Absent && !ib->labels.values.empty()) {
            throw ShapeError("absent labels must carry no values");
        }
    }
}

}  // namespace

std::vector<std::uint8_t> serialize_message(const Message& msg) {
    validate(msg);
    Writer w;
    w.u8(static_cast<std::uint8_t>(msg.index()));
    std::visit(
        [&w](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            w.u32(m.client_id);
            if constexpr (std::is_same_v<T, IntermediateBatch>) {
                w.tensor(m.activations);
                w.labels(m.labels);
            } else if constexpr (std::is_same_v<T, ServerOutput>) {
                w.u32(m.batch_tag);
                w.tensor(m.logits);
            } else if constexpr (std::is_same_v<T, OutputGradient>) {
                w.u32(m.batch_tag);
                w.tensor(m.grad);
            } else {
                w.u8(static_cast<std::uint8_t>(m.kind));
            }
        },
        msg);
    return std::move(w.out);
}

Message deserialize_message(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    const std::uint8_t tag = r.u8();
    const std::uint32_t client_id = r.u32();
    Message msg;
    switch (tag) {
        case 0: {
            IntermediateBatch ib;
            ib.client_id = client_id;
            ib.activations = r.tensor();
            ib.labels = r.labels();
            msg = std::move(ib);
            break;
        }
        case 1: {
            ServerOutput so;
            so.client_id = client_id;
            so.batch_tag = r.u32();
            so.logits = r.tensor();
            msg = std::move(so);
            break;
        }
        case 2: {
            OutputGradient og;
            og.client_id = client_id;
            og.batch_tag = r.u32();
            og.grad = r.tensor();
            msg = std::move(og);
            break;
        }
        case 3: {
            Control ctl;
            ctl.client_id = client_id;
            const std::uint8_t kind = r.u8();
            if (kind > 1) throw FormatError("unknown control kind");
            ctl.kind = static_cast<ControlKind>(kind);
            msg = ctl;
            break;
        }
        default:
            throw FormatError("unknown message variant tag");
    }
    if (r.pos != bytes.size()) throw FormatError("trailing bytes after message");
    validate(msg);
    return msg;
}

std::size_t serialized_size(const Message& msg) {
    validate(msg);
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            constexpr std::size_t header = 1 + 4;  // variant tag + client id
            if constexpr (std::is_same_v<T, IntermediateBatch>) {
                return header + 8 + m.activations.size() * sizeof(double) + 5 +
                       m.labels.values.size() * 4;
            } else if constexpr (std::is_same_v<T, ServerOutput>) {
                return header + 4 + 8 + m.logits.size() * sizeof(double);
            } else if constexpr (std::is_same_v<T, OutputGradient>) {
                return header + 4 + 8 + m.grad.size() * sizeof(double);
            } else {
                return header + 1;
            }
        },
        msg);
}

}  // namespace splitwiper
