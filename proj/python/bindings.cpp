#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "splitwiper/errors.hpp"
#include "splitwiper/gradcheck.hpp"
#include "splitwiper/metrics.hpp"
#include "splitwiper/pipelines.hpp"

namespace py = pybind11;
using namespace splitwiper;

namespace {

py::array_t<double> tensor_to_numpy(const Tensor& t) {
    py::array_t<double> out({t.rows(), t.cols()});
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

Tensor numpy_to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D float array");
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  std::move(data));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SISA-based split learning with unlearning strategies";

    py::enum_<LabelMode>(m, "LabelMode")
        .value("LABEL_SHARING", LabelMode::LabelSharing)
        .value("NON_LABEL_SHARING", LabelMode::NonLabelSharing);
    py::enum_<ServerInitMode>(m, "ServerInitMode")
        .value("WARM_START", ServerInitMode::WarmStart)
        .value("COLD_REINIT", ServerInitMode::ColdReinit);
    py::enum_<Strategy2Replay>(m, "Strategy2Replay")
        .value("CACHE_REPLAY", Strategy2Replay::CacheReplay)
        .value("INTERACTIVE_ONLY", Strategy2Replay::InteractiveOnly);
    py::enum_<PartitionMode>(m, "PartitionMode")
        .value("DIRICHLET", PartitionMode::Dirichlet)
        .value("EQUAL", PartitionMode::Equal);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init([](const py::array_t<double>& features,
                         std::vector<std::uint32_t> labels, std::uint32_t class_count) {
                 Dataset ds;
                 ds.features = numpy_to_tensor(features);
                 ds.labels = std::move(labels);
                 ds.class_count = class_count;
                 if (ds.labels.size() != ds.features.rows()) {
                     throw ShapeError("label count does not match feature rows");
                 }
                 return ds;
             }),
             py::arg("features"), py::arg("labels"), py::arg("class_count"))
        .def_property_readonly("features",
                               [](const Dataset& ds) { return tensor_to_numpy(ds.features); })
        .def_readonly("labels", &Dataset::labels)
        .def_readonly("class_count", &Dataset::class_count)
        .def("__len__", &Dataset::size);

    py::class_<Shard>(m, "Shard")
        .def_readonly("client_id", &Shard::client_id)
        .def_readonly("dataset", &Shard::dataset)
        .def_readonly("origin_indices", &Shard::origin_indices)
        .def("__len__", &Shard::size);

    py::class_<UnlearnRequest>(m, "UnlearnRequest")
        .def_static("by_class", &UnlearnRequest::by_class, py::arg("client"), py::arg("cls"))
        .def_static("by_indices", &UnlearnRequest::by_indices, py::arg("client"),
                    py::arg("indices"))
        .def_static("none", &UnlearnRequest::none, py::arg("client"))
        .def_readonly("client_id", &UnlearnRequest::client_id);

    py::class_<MlpModel>(m, "MlpModel")
        .def_property_readonly("frozen", &MlpModel::frozen)
        .def_property_readonly("dropout_rate", &MlpModel::dropout_rate)
        .def("forward",
             [](const MlpModel& model, const py::array_t<double>& batch) {
                 return tensor_to_numpy(forward_eval(model, numpy_to_tensor(batch)));
             },
             py::arg("batch"), "Eval-mode forward pass (no dropout, no mutation).")
        .def("mac_count",
             [](const MlpModel& model, std::size_t rows, bool backward_too) {
                 return mac_count(model, rows,
                                  backward_too ? PassKind::ForwardBackward : PassKind::Forward);
             },
             py::arg("batch_rows"), py::arg("backward") = false)
        .def("save",
             [](const MlpModel& model, const std::filesystem::path& path) {
                 save_checkpoint(model, path);
             },
             py::arg("path"));

    m.def("init_mlp",
          [](const std::vector<std::size_t>& dims, double dropout_rate, std::uint64_t seed) {
              return init_mlp(dims, dropout_rate, seed);
          },
          py::arg("layer_dims"), py::arg("dropout_rate"), py::arg("seed"));

    m.def("gen_blobs", &gen_blobs, py::arg("class_count"), py::arg("dims"),
          py::arg("samples_per_class"), py::arg("spread"), py::arg("seed"));
    m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_column") = "label");
    m.def("save_csv", &save_csv, py::arg("dataset"), py::arg("path"));
    m.def("partition_noniid", &partition_noniid, py::arg("dataset"), py::arg("clients"),
          py::arg("alpha"), py::arg("seed"));
    m.def("partition_equal", &partition_equal, py::arg("dataset"), py::arg("clients"));
    m.def("apply_unlearn_request", &apply_unlearn_request, py::arg("shard"), py::arg("request"));
    m.def("selected_dataset", &selected_dataset, py::arg("shard"), py::arg("request"));
    m.def("shards_after_unlearn", &shards_after_unlearn, py::arg("shards"), py::arg("request"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_static("from_json", &ExperimentConfig::from_json_text, py::arg("text"))
        .def("to_json", &ExperimentConfig::canonical_text)
        .def("run_id", &ExperimentConfig::run_id)
        .def_readwrite("K", &ExperimentConfig::clients)
        .def_readwrite("N", &ExperimentConfig::client_epochs)
        .def_readwrite("M", &ExperimentConfig::server_epochs);

    py::class_<WorldState>(m, "WorldState")
        .def_readonly("cfg", &WorldState::cfg)
        .def_readonly("shards", &WorldState::shards)
        .def_readonly("client_models", &WorldState::client_models)
        .def_readonly("server_model", &WorldState::server_model)
        .def("evaluate", &evaluate_client, py::arg("client"), py::arg("dataset"),
             "Top-1 accuracy of the composed model from one client's view.")
        .def("predict",
             [](const WorldState& w, std::uint32_t client, const py::array_t<double>& x) {
                 return predict_labels(w, client, numpy_to_tensor(x));
             },
             py::arg("client"), py::arg("features"))
        .def("ledger_json",
             [](const WorldState& w) { return w.ledger->snapshot().to_json().dump(); })
        .def("message_log_jsonl", [](const WorldState& w) { return w.transport->log_jsonl(); });

    m.def("run_training",
          [](const ExperimentConfig& cfg, const Dataset& ds, unsigned threads) {
              return run_training(cfg, ds, {threads});
          },
          py::arg("cfg"), py::arg("dataset"), py::arg("threads") = 1);
    m.def("train_on_shards",
          [](const ExperimentConfig& cfg, std::vector<Shard> shards, unsigned threads) {
              return train_on_shards(cfg, std::move(shards), {threads},
                                     /*require_m_gt_n=*/true);
          },
          py::arg("cfg"), py::arg("shards"), py::arg("threads") = 1);
    m.def("run_strategy0", &run_strategy0, py::arg("cfg"), py::arg("dataset"), py::arg("request"));
    m.def("run_strategy1",
          [](const WorldState& world, const ExperimentConfig& cfg, const UnlearnRequest& req) {
              return run_strategy1(WorldState(world), cfg, req);
          },
          py::arg("world"), py::arg("cfg"), py::arg("request"),
          "Returns the unlearned world. The run ledger is shared with the input world.");
    m.def("run_strategy2",
          [](const WorldState& world, const ExperimentConfig& cfg, const UnlearnRequest& req) {
              return run_strategy2(WorldState(world), cfg, req);
          },
          py::arg("world"), py::arg("cfg"), py::arg("request"),
          "Returns the unlearned world. The run ledger is shared with the input world.");
    m.def("retrain_oracle",
          [](const ExperimentConfig& cfg, std::vector<Shard> shards, unsigned threads) {
              return retrain_oracle(cfg, std::move(shards), {threads});
          },
          py::arg("cfg"), py::arg("shards"), py::arg("threads") = 1);
    m.def("build_dataset", &build_dataset, py::arg("cfg"));
    m.def("partition_dataset", &partition_dataset, py::arg("cfg"), py::arg("dataset"));

    m.def("evaluate_client", &evaluate_client, py::arg("world"), py::arg("client"),
          py::arg("dataset"));
    m.def("parameter_distance", &parameter_distance, py::arg("a"), py::arg("b"));
    m.def("models_bit_equal", &models_bit_equal, py::arg("a"), py::arg("b"));
    m.def("run_gradcheck",
          [](std::uint64_t seed, std::size_t draws) {
              return run_gradcheck(seed, draws).to_json().dump();
          },
          py::arg("seed") = 1, py::arg("draws") = 24,
          "Finite-difference backprop check; returns the report as a JSON string.");
    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("loss_softmax_xent",
          [](const py::array_t<double>& logits, const std::vector<std::uint32_t>& labels) {
              auto [loss, dlogits] = loss_softmax_xent(numpy_to_tensor(logits), labels);
              return py::make_tuple(loss, tensor_to_numpy(dlogits));
          },
          py::arg("logits"), py::arg("labels"));
}
