#include "splitwiper/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "splitwiper/mlp.hpp"
#include "splitwiper/rng.hpp"

namespace splitwiper {

namespace {

constexpr double kStep = 1e-6;
constexpr double kDenomFloor = 1e-3;
constexpr double kKinkMargin = 1e-4;

double loss_of(MlpModel& model, const Tensor& batch, const std::vector<std::uint32_t>& labels) {
    auto [logits, trace] = forward(model, batch, RunMode::Eval);
    return loss_softmax_xent(logits, labels).first;
}

double rel_err(double analytic, double fd) {
    const double denom = std::max({std::abs(analytic), std::abs(fd), kDenomFloor});
    return std::abs(analytic - fd) / denom;
}

bool near_relu_kink(MlpModel& model, const Tensor& batch) {
    auto [logits, trace] = forward(model, batch, RunMode::Eval);
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        if (model.layers()[l].activation != Activation::Relu) continue;
        for (double z : trace.pre_activations[l].raw()) {
            if (std::abs(z) < kKinkMargin) return true;
        }
    }
    return false;
}

}  // namespace

nlohmann::json GradCheckReport::to_json() const {
    nlohmann::json draws_json = nlohmann::json::array();
    for (const GradCheckDraw& d : per_draw) {
        draws_json.push_back({{"dims", d.dims},
                              {"batch_rows", d.batch_rows},
                              {"max_rel_err", d.max_rel_err}});
    }
    return {{"seed", seed},           {"draws", draws},   {"max_rel_err", max_rel_err},
            {"tolerance", tolerance}, {"pass", pass},     {"per_draw", std::move(draws_json)}};
}

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t draws, int corrupt_layer) {
    GradCheckReport report;
    report.seed = seed;
    report.draws = draws;

    SplitMix64 rng(derive_seed(seed, 0xAD));
    for (std::size_t draw = 0; draw < draws; ++draw) {
        MlpModel model;
        Tensor batch;
        std::vector<std::uint32_t> labels;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const std::size_t n_layers = 1 + rng.next_below(3);
            std::vector<std::size_t> dims;
            for (std::size_t i = 0; i <= n_layers; ++i) dims.push_back(2 + rng.next_below(5));
            std::vector<Activation> plan;
            for (std::size_t i = 0; i < n_layers; ++i) {
                plan.push_back(i + 1 == n_layers   ? Activation::Identity
                               : rng.next() % 2 == 0 ? Activation::Relu
                                                     : Activation::Identity);
            }
            model = init_mlp(dims, plan, /*dropout_rate=*/0.0, rng.next());
            const std::size_t rows = 1 + rng.next_below(8);
            batch = Tensor(rows, dims.front());
            for (double& v : batch.raw()) v = rng.next_normal();
            labels.assign(rows, 0);
            for (auto& y : labels) {
                y = static_cast<std::uint32_t>(rng.next_below(dims.back()));
            }
            if (!near_relu_kink(model, batch)) break;
        }

        auto [logits, trace] = forward(model, batch, RunMode::Eval);
        auto [loss, dlogits] = loss_softmax_xent(logits, labels);
        auto [grads, input_grad] = backward(model, trace, dlogits);
        (void)loss;

        if (corrupt_layer >= 0 &&
            static_cast<std::size_t>(corrupt_layer) < grads.layers.size()) {
            for (double& g : grads.layers[static_cast<std::size_t>(corrupt_layer)].weights.raw()) {
                g *= 1.0001;
            }
        }

        GradCheckDraw dr;
        for (const DenseLayer& layer : model.layers()) dr.dims.push_back(layer.in_dim());
        dr.dims.push_back(model.layers().back().out_dim());
        dr.batch_rows = batch.rows();

        // Parameter gradients against central differences.
        for (std::size_t l = 0; l < model.layers().size(); ++l) {
            auto check_param = [&](Tensor& param, const Tensor& analytic) {
                for (std::size_t i = 0; i < param.size(); ++i) {
                    const double orig = param.raw()[i];
                    param.raw()[i] = orig + kStep;
                    const double plus = loss_of(model, batch, labels);
                    param.raw()[i] = orig - kStep;
                    const double minus = loss_of(model, batch, labels);
                    param.raw()[i] = orig;
                    const double fd = (plus - minus) / (2.0 * kStep);
                    dr.max_rel_err = std::max(dr.max_rel_err, rel_err(analytic.raw()[i], fd));
                }
            };
            check_param(model.layers()[l].weights, grads.layers[l].weights);
            check_param(model.layers()[l].bias, grads.layers[l].bias);
        }
        // Input gradient (the protocol's G) the same way.
        Tensor probe = batch;
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const double orig = probe.raw()[i];
            probe.raw()[i] = orig + kStep;
            const double plus = loss_of(model, probe, labels);
            probe.raw()[i] = orig - kStep;
            const double minus = loss_of(model, probe, labels);
            probe.raw()[i] = orig;
            const double fd = (plus - minus) / (2.0 * kStep);
            dr.max_rel_err = std::max(dr.max_rel_err, rel_err(input_grad.raw()[i], fd));
        }

        report.max_rel_err = std::max(report.max_rel_err, dr.max_rel_err);
        report.per_draw.push_back(std::move(dr));
    }
    report.pass = report.max_rel_err < report.tolerance;
    return report;
}

}  // namespace splitwiper
