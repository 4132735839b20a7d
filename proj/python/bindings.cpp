#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>
#include <pybind11/stl_bind.h>

#include "fedlog/bench.hpp"
#include "fedlog/errors.hpp"
#include "fedlog/version.hpp"

// Rounds mutate clients in place; an opaque list keeps reference semantics
// instead of the copying list caster, which would silently drop training.
PYBIND11_MAKE_OPAQUE(std::vector<fedlog::ClientState>);

namespace py = pybind11;
using namespace fedlog;

namespace {

std::vector<std::pair<SufficientStatistic, std::size_t>> to_message_pairs(
    const std::vector<std::pair<SufficientStatistic, std::size_t>>& v) {
    return v;
}

}  // namespace

PYBIND11_MODULE(_fedlog, m) {
    m.doc() =
        "Federated learning by sharing summed sufficient statistics: a "
        "client-local body network feeds a global exponential-family head "
        "learned by MAP inference, with optional Gaussian privacy noise.";
    m.attr("__version__") = FEDLOG_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError",
                                          PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    // random streams
    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform", py::overload_cast<>(&Rng::uniform))
        .def("uniform", py::overload_cast<double, double>(&Rng::uniform),
             py::arg("lo"), py::arg("hi"))
        .def("gaussian", py::overload_cast<>(&Rng::gaussian))
        .def("gaussian", py::overload_cast<double, double>(&Rng::gaussian),
             py::arg("mean"), py::arg("stddev"));
    m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("tag0"),
          py::arg("tag1") = 0);

    // exponential-family head
    py::class_<HeadParams>(m, "HeadParams")
        .def(py::init<>())
        .def(py::init<std::size_t, std::size_t>(), py::arg("m"),
             py::arg("n_class"))
        .def_readonly("m", &HeadParams::m)
        .def_readonly("n_class", &HeadParams::n_class)
        .def_readwrite("eta", &HeadParams::eta);

    py::class_<SufficientStatistic>(m, "SufficientStatistic")
        .def(py::init<>())
        .def(py::init<std::size_t, std::size_t>(), py::arg("m"),
             py::arg("n_class"))
        .def_readonly("m", &SufficientStatistic::m)
        .def_readonly("n_class", &SufficientStatistic::n_class)
        .def_readwrite("values", &SufficientStatistic::values);

    py::class_<PriorParams>(m, "PriorParams")
        .def(py::init<>())
        .def(py::init<std::size_t, double>(), py::arg("dim"), py::arg("nu"))
        .def_readwrite("chi", &PriorParams::chi)
        .def_readwrite("nu", &PriorParams::nu);

    py::class_<PosteriorParams>(m, "PosteriorParams")
        .def_readonly("chi_post", &PosteriorParams::chi_post)
        .def_readonly("nu_post", &PosteriorParams::nu_post);

    py::class_<MapResult>(m, "MapResult")
        .def_readonly("head", &MapResult::head)
        .def_readonly("converged", &MapResult::converged)
        .def_readonly("iterations", &MapResult::iterations);

    m.def(
        "sufficient_statistic",
        [](const std::vector<double>& phi, int y, std::size_t n_class) {
            return sufficient_statistic(phi, y, n_class);
        },
        py::arg("phi"), py::arg("y"), py::arg("n_class"));
    m.def("cumulant", &cumulant, py::arg("head"));
    m.def(
        "conditional_log_probs",
        [](const HeadParams& head, const std::vector<double>& phi) {
            return conditional_log_probs(head, phi);
        },
        py::arg("head"), py::arg("phi"));
    m.def(
        "classify",
        [](const HeadParams& head, const std::vector<double>& phi) {
            return classify(head, phi);
        },
        py::arg("head"), py::arg("phi"));
    m.def(
        "log_posterior_kernel",
        [](const HeadParams& head, const std::vector<double>& chi_post,
           double nu_post) {
            return log_posterior_kernel(head, chi_post, nu_post);
        },
        py::arg("head"), py::arg("chi_post"), py::arg("nu_post"));
    m.def(
        "kernel_gradient",
        [](const HeadParams& head, const std::vector<double>& chi_post,
           double nu_post) {
            return kernel_gradient(head, chi_post, nu_post);
        },
        py::arg("head"), py::arg("chi_post"), py::arg("nu_post"));
    m.def("map_solve", &map_solve, py::arg("prior"), py::arg("stat_sum"),
          py::arg("n"), py::arg("init"), py::arg("tol") = 1e-6,
          py::arg("max_iters") = 10000);
    m.def(
        "posterior_update",
        [](const PriorParams& prior,
           const std::vector<std::pair<SufficientStatistic, std::size_t>>&
               messages) {
            const auto pairs = to_message_pairs(messages);
            return posterior_update(prior, pairs);
        },
        py::arg("prior"), py::arg("messages"));

    // body networks
    py::enum_<Activation>(m, "Activation")
        .value("identity", Activation::identity)
        .value("relu", Activation::relu)
        .value("clamp", Activation::clamp);

    py::class_<DenseLayer>(m, "DenseLayer")
        .def(py::init<>())
        .def_readwrite("in_dim", &DenseLayer::in_dim)
        .def_readwrite("out_dim", &DenseLayer::out_dim)
        .def_readwrite("weights", &DenseLayer::weights)
        .def_readwrite("biases", &DenseLayer::biases)
        .def_readwrite("activation", &DenseLayer::activation)
        .def_readwrite("clamp_bound", &DenseLayer::clamp_bound);

    py::class_<BodyNetwork>(m, "BodyNetwork")
        .def(py::init<>())
        .def_readwrite("layers", &BodyNetwork::layers)
        .def("input_dim", &BodyNetwork::input_dim)
        .def("feature_dim", &BodyNetwork::feature_dim);

    m.def("clamp_activation", &clamp_activation, py::arg("x"), py::arg("b"));
    m.def("validate_body", &validate_body, py::arg("body"));
    m.def("make_dense_body", &make_dense_body, py::arg("input_dim"),
          py::arg("hidden_dims"), py::arg("output_dim"), py::arg("seed"),
          py::arg("clamp_bound") = 0.0);
    m.def(
        "forward_one",
        [](const BodyNetwork& body, const std::vector<double>& input) {
            return forward_one(body, input);
        },
        py::arg("body"), py::arg("input"));
    m.def("forward", &forward, py::arg("body"), py::arg("inputs"));
    m.def(
        "cross_entropy_loss",
        [](const std::vector<std::vector<double>>& features,
           const std::vector<int>& labels, const HeadParams& head) {
            return cross_entropy_loss(features, labels, head);
        },
        py::arg("features"), py::arg("labels"), py::arg("head"));

    py::enum_<OptimizerKind>(m, "OptimizerKind")
        .value("sgd", OptimizerKind::sgd)
        .value("adam", OptimizerKind::adam);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("local_epochs", &TrainConfig::local_epochs)
        .def_readwrite("optimizer", &TrainConfig::optimizer)
        .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
        .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
        .def_readwrite("adam_eps", &TrainConfig::adam_eps);

    // data
    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def(py::init<>())
        .def_readwrite("inputs", &LabeledDataset::inputs)
        .def_readwrite("labels", &LabeledDataset::labels)
        .def_readwrite("n_class", &LabeledDataset::n_class)
        .def("size", &LabeledDataset::size);

    py::class_<PartitionSpec>(m, "PartitionSpec")
        .def(py::init<>())
        .def_readwrite("n_clients", &PartitionSpec::n_clients)
        .def_readwrite("classes_per_client", &PartitionSpec::classes_per_client)
        .def_readwrite("seed", &PartitionSpec::seed);

    m.def("gen_circle", &gen_circle, py::arg("n"), py::arg("seed"));
    m.def("split_by_sorted_x1", &split_by_sorted_x1, py::arg("data"));
    m.def("shard_partition", &shard_partition, py::arg("data"),
          py::arg("spec"));
    m.def("stratified_subsample", &stratified_subsample, py::arg("data"),
          py::arg("fraction"), py::arg("seed"));
    m.def("partition_test_like", &partition_test_like, py::arg("test"),
          py::arg("train_parts"), py::arg("seed"));
    m.def(
        "parse_idx",
        [](const py::bytes& raw) {
            const std::string s = raw;
            return parse_idx(std::vector<std::uint8_t>(s.begin(), s.end()));
        },
        py::arg("raw"));
    m.def(
        "serialize_idx",
        [](const IdxTensor& tensor) {
            const auto bytes = serialize_idx(tensor);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()),
                             bytes.size());
        },
        py::arg("tensor"));
    py::class_<IdxTensor>(m, "IdxTensor")
        .def(py::init<>())
        .def_readwrite("shape", &IdxTensor::shape)
        .def_readwrite("data", &IdxTensor::data);
    m.def("load_idx_dataset", &load_idx_dataset, py::arg("images_path"),
          py::arg("labels_path"), py::arg("n_class") = 0);

    // privacy
    py::class_<PrivacyParams>(m, "PrivacyParams")
        .def(py::init<>())
        .def_readwrite("epsilon", &PrivacyParams::epsilon)
        .def_readwrite("delta", &PrivacyParams::delta)
        .def_readwrite("clip_bound", &PrivacyParams::clip_bound);

    py::enum_<NoiseScope>(m, "NoiseScope")
        .value("per_message", NoiseScope::per_message)
        .value("global_scope", NoiseScope::global);

    m.def("l2_sensitivity", &l2_sensitivity, py::arg("m"), py::arg("b"));
    m.def("noise_sigma", &noise_sigma, py::arg("privacy"), py::arg("m"));
    m.def("privatize", &privatize, py::arg("msg"), py::arg("sigma"),
          py::arg("rng"));

    // federation
    py::class_<RoundMessage>(m, "RoundMessage")
        .def(py::init<>())
        .def_readwrite("client_id", &RoundMessage::client_id)
        .def_readwrite("stat_sum", &RoundMessage::stat_sum)
        .def_readwrite("count", &RoundMessage::count);

    m.def(
        "serialize_message",
        [](const RoundMessage& msg, int float_width) {
            const auto bytes = serialize_message(msg, float_width);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()),
                             bytes.size());
        },
        py::arg("msg"), py::arg("float_width"));
    m.def(
        "deserialize_message",
        [](const py::bytes& raw) {
            const std::string s = raw;
            return deserialize_message(
                std::vector<std::uint8_t>(s.begin(), s.end()));
        },
        py::arg("raw"));

    py::class_<ClientState>(m, "ClientState")
        .def(py::init<>())
        .def_readwrite("id", &ClientState::id)
        .def_readwrite("body", &ClientState::body)
        .def_readwrite("train_data", &ClientState::train_data)
        .def_readwrite("test_data", &ClientState::test_data)
        .def_readwrite("config", &ClientState::config)
        .def_readwrite("local_head", &ClientState::local_head)
        .def_readwrite("rng", &ClientState::rng);

    py::bind_vector<std::vector<ClientState>>(m, "ClientList");

    py::class_<ServerState>(m, "ServerState")
        .def(py::init<>())
        .def_readwrite("head", &ServerState::head)
        .def_readwrite("prior", &ServerState::prior)
        .def_readwrite("round", &ServerState::round);

    m.def("make_server", &make_server, py::arg("m"), py::arg("n_class"),
          py::arg("prior_nu") = 1.0);

    py::enum_<TrainStatus>(m, "TrainStatus")
        .value("ok", TrainStatus::ok)
        .value("skipped_empty", TrainStatus::skipped_empty);

    m.def("local_train", &local_train, py::arg("client"), py::arg("head"));
    m.def("joint_local_train", &joint_local_train, py::arg("client"));
    m.def("summarize",
          py::overload_cast<const ClientState&>(&summarize),
          py::arg("client"));
    m.def("summarize",
          py::overload_cast<const ClientState&, const PrivacyParams&, Rng&>(
              &summarize),
          py::arg("client"), py::arg("privacy"), py::arg("noise_rng"));

    py::class_<RoundOptions>(m, "RoundOptions")
        .def(py::init<>())
        .def_readwrite("wire_float_width", &RoundOptions::wire_float_width)
        .def_readwrite("parallel", &RoundOptions::parallel)
        .def_readwrite("privacy", &RoundOptions::privacy)
        .def_readwrite("noise_scope", &RoundOptions::noise_scope)
        .def_readwrite("noise_seed", &RoundOptions::noise_seed)
        .def_readwrite("map_tol", &RoundOptions::map_tol)
        .def_readwrite("map_max_iters", &RoundOptions::map_max_iters);

    py::class_<RoundResult>(m, "RoundResult")
        .def_readonly("uplink_bytes", &RoundResult::uplink_bytes)
        .def_readonly("downlink_bytes", &RoundResult::downlink_bytes)
        .def_readonly("map_converged", &RoundResult::map_converged)
        .def_readonly("map_iterations", &RoundResult::map_iterations)
        .def_readonly("skipped_clients", &RoundResult::skipped_clients);

    m.def("fedlog_round", &fedlog_round, py::arg("server"), py::arg("clients"),
          py::arg("options"));
    m.def("fedavg_aggregate", &fedavg_aggregate, py::arg("models"),
          py::arg("weights"));

    py::class_<FedAvgState>(m, "FedAvgState")
        .def(py::init<>())
        .def_readwrite("body", &FedAvgState::body)
        .def_readwrite("head", &FedAvgState::head)
        .def_readwrite("round", &FedAvgState::round);
    m.def("fedavg_round", &fedavg_round, py::arg("server"), py::arg("clients"),
          py::arg("options"));

    py::class_<LgFedAvgState>(m, "LgFedAvgState")
        .def(py::init<>())
        .def_readwrite("head", &LgFedAvgState::head)
        .def_readwrite("round", &LgFedAvgState::round);
    m.def("lgfedavg_round", &lgfedavg_round, py::arg("server"),
          py::arg("clients"), py::arg("options"));

    m.def("accuracy", &accuracy, py::arg("body"), py::arg("head"),
          py::arg("data"));

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("per_client", &EvalResult::per_client)
        .def_readonly("total_points", &EvalResult::total_points)
        .def_readonly("mean", &EvalResult::mean);
    m.def("evaluate", &evaluate, py::arg("clients"), py::arg("head"));

    // experiments
    py::enum_<Task>(m, "Task")
        .value("synthetic_circle", Task::synthetic_circle)
        .value("idx_images", Task::idx_images);

    py::enum_<Algorithm>(m, "Algorithm")
        .value("fedlog", Algorithm::fedlog)
        .value("fedavg", Algorithm::fedavg)
        .value("lgfedavg1", Algorithm::lgfedavg1);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("task", &ExperimentConfig::task)
        .def_readwrite("algorithm", &ExperimentConfig::algorithm)
        .def_readwrite("rounds", &ExperimentConfig::rounds)
        .def_readwrite("local_epochs", &ExperimentConfig::local_epochs)
        .def_readwrite("batch_size", &ExperimentConfig::batch_size)
        .def_readwrite("learning_rate", &ExperimentConfig::learning_rate)
        .def_readwrite("optimizer", &ExperimentConfig::optimizer)
        .def_readwrite("map_tol", &ExperimentConfig::map_tol)
        .def_readwrite("map_max_iters", &ExperimentConfig::map_max_iters)
        .def_readwrite("n_clients", &ExperimentConfig::n_clients)
        .def_readwrite("classes_per_client",
                       &ExperimentConfig::classes_per_client)
        .def_readwrite("m", &ExperimentConfig::m)
        .def_readwrite("hidden_dims_groups",
                       &ExperimentConfig::hidden_dims_groups)
        .def_readwrite("clamp_bound", &ExperimentConfig::clamp_bound)
        .def_readwrite("privacy", &ExperimentConfig::privacy)
        .def_readwrite("noise_scope", &ExperimentConfig::noise_scope)
        .def_readwrite("wire_float_bits", &ExperimentConfig::wire_float_bits)
        .def_readwrite("seeds", &ExperimentConfig::seeds)
        .def_readwrite("parallel_clients", &ExperimentConfig::parallel_clients)
        .def_readwrite("prior_nu", &ExperimentConfig::prior_nu)
        .def_readwrite("train_points", &ExperimentConfig::train_points)
        .def_readwrite("test_points", &ExperimentConfig::test_points)
        .def_readwrite("train_images", &ExperimentConfig::train_images)
        .def_readwrite("train_labels", &ExperimentConfig::train_labels)
        .def_readwrite("test_images", &ExperimentConfig::test_images)
        .def_readwrite("test_labels", &ExperimentConfig::test_labels)
        .def_readwrite("subsample_fraction",
                       &ExperimentConfig::subsample_fraction);

    m.def("validate_experiment_config", &validate_experiment_config,
          py::arg("config"));
    m.def("parse_config_file", &parse_config_file, py::arg("path"));

    py::class_<MetricsRow>(m, "MetricsRow")
        .def(py::init<>())
        .def_readwrite("seed", &MetricsRow::seed)
        .def_readwrite("round", &MetricsRow::round)
        .def_readwrite("algorithm", &MetricsRow::algorithm)
        .def_readwrite("mean_test_accuracy", &MetricsRow::mean_test_accuracy)
        .def_readwrite("client_acc_mean", &MetricsRow::client_acc_mean)
        .def_readwrite("client_acc_min", &MetricsRow::client_acc_min)
        .def_readwrite("client_acc_max", &MetricsRow::client_acc_max)
        .def_readwrite("uplink_bits_per_client",
                       &MetricsRow::uplink_bits_per_client)
        .def_readwrite("downlink_bits_per_client",
                       &MetricsRow::downlink_bits_per_client)
        .def_readwrite("map_iterations", &MetricsRow::map_iterations)
        .def(py::self == py::self);

    py::class_<ExperimentSetup>(m, "ExperimentSetup")
        .def_readwrite("clients", &ExperimentSetup::clients)
        .def_readwrite("server", &ExperimentSetup::server)
        .def_readwrite("fedavg_server", &ExperimentSetup::fedavg_server)
        .def_readwrite("lg_server", &ExperimentSetup::lg_server)
        .def_readonly("n_class", &ExperimentSetup::n_class);
    m.def("make_setup", &make_setup, py::arg("config"), py::arg("seed"));

    py::class_<ExperimentResult>(m, "ExperimentResult")
        .def_readonly("rows", &ExperimentResult::rows)
        .def_readonly("wall_ms", &ExperimentResult::wall_ms);
    m.def("run_experiment", &run_experiment, py::arg("config"));

    m.def("message_size_bits", &message_size_bits, py::arg("m"),
          py::arg("n_class"), py::arg("float_bits"));

    py::class_<WilcoxonResult>(m, "WilcoxonResult")
        .def_readonly("p_value", &WilcoxonResult::p_value)
        .def_readonly("statistic", &WilcoxonResult::statistic)
        .def_readonly("n_effective", &WilcoxonResult::n_effective)
        .def_readonly("degenerate", &WilcoxonResult::degenerate)
        .def_readonly("exact", &WilcoxonResult::exact);
    m.def(
        "wilcoxon_one_tailed",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return wilcoxon_one_tailed(a, b);
        },
        py::arg("a"), py::arg("b"));

    m.def("write_metrics", &write_metrics, py::arg("rows"),
          py::arg("csv_path"));
    m.def("parse_metrics", &parse_metrics, py::arg("csv_path"));
    m.def("write_sidecar", &write_sidecar, py::arg("config"),
          py::arg("result"), py::arg("json_path"));
}
