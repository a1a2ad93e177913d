#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "grownet/cli.hpp"
#include "grownet/gradcheck.hpp"
#include "grownet/train.hpp"

namespace py = pybind11;
using namespace grownet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() == 1) {
        Matrix m(static_cast<std::size_t>(a.shape(0)), 1);
        std::copy(a.data(), a.data() + a.size(), m.data().begin());
        return m;
    }
    if (a.ndim() != 2) throw std::invalid_argument("expected a 1-D or 2-D array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data().begin());
    return m;
}

Array to_array(const Matrix& m) {
    Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Dataset make_dataset(const Array& x, const Array& y, const std::string& name) {
    Dataset d;
    d.name = name;
    d.inputs = to_matrix(x);
    d.labels = to_matrix(y);
    if (d.inputs.rows() != d.labels.rows()) throw std::invalid_argument("inputs and labels differ in sample count");
    return d;
}

template <typename M>
py::dict result_dict(const GrowthResult<M>& r) {
    std::ostringstream csv, events;
    r.log.write_csv(csv);
    r.log.write_events(events);
    py::dict d;
    d["best"] = r.best;
    d["last"] = r.last;
    d["best_val"] = r.best_val;
    d["last_val"] = r.last_val;
    d["stop_reason"] = std::string(to_string(r.log.stop));
    d["best_stage"] = r.log.best_stage;
    d["stage_best_val"] = r.log.stage_best_val;
    d["run_log_csv"] = csv.str();
    d["events_jsonl"] = events.str();
    return d;
}

DataSplits splits(const Dataset& train, const Dataset& val, const std::optional<Dataset>& test) {
    return {train, val, test.value_or(Dataset{})};
}

}  // namespace

PYBIND11_MODULE(_grownet, m) {
    m.doc() = "Growing residual networks guided by the topological derivative";

    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<ActivationSpec>(m, "Activation")
        .def_readonly("name", &ActivationSpec::name)
        .def_readonly("alpha1", &ActivationSpec::alpha1)
        .def_readonly("curvature_at_zero", &ActivationSpec::curvature_at_zero)
        .def("__call__", &ActivationSpec::eval)
        .def("d1", &ActivationSpec::d1)
        .def("d2", &ActivationSpec::d2);
    m.def("make_admissible", &make_admissible, py::arg("pair"));

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("inputs"), py::arg("labels"), py::arg("name") = "data")
        .def_readwrite("name", &Dataset::name)
        .def_property_readonly("inputs", [](const Dataset& d) { return to_array(d.inputs); })
        .def_property_readonly("labels", [](const Dataset& d) { return to_array(d.labels); })
        .def("__len__", &Dataset::size)
        .def("slice", &Dataset::slice);
    m.def("gen_gaussian_regression",
          [](std::uint64_t seed, std::size_t samples, std::size_t n0, std::size_t nT, double noise) {
              TeacherOptions t;
              t.noise = noise;
              return gen_gaussian_regression(seed, samples, n0, nT, t);
          },
          py::arg("seed"), py::arg("samples"), py::arg("inputs"), py::arg("outputs"), py::arg("noise") = 0.0);
    m.def("load_csv", [](const std::string& p, std::size_t n0, std::size_t nT) { return load_csv(p, n0, nT); });
    m.def("save_csv", [](const Dataset& d, const std::string& p) { save_csv(d, p); });

    py::class_<NetworkSpec>(m, "NetworkSpec")
        .def(py::init([](std::size_t n0, std::size_t nT, std::size_t width, std::size_t hidden,
                         const std::string& pair, const std::string& loss, double sparsity) {
                 NetworkSpec s;
                 s.input_dim = n0;
                 s.output_dim = nT;
                 s.width = width;
                 s.hidden_count = hidden;
                 s.activation = make_admissible(pair);
                 s.loss = parse_loss_kind(loss);
                 s.input_sparsity = sparsity;
                 s.validate();
                 return s;
             }),
             py::arg("inputs"), py::arg("outputs"), py::arg("width"), py::arg("hidden") = 0,
             py::arg("activation") = "swish+tanh", py::arg("loss") = "mse", py::arg("sparsity") = 0.0)
        .def_readonly("input_dim", &NetworkSpec::input_dim)
        .def_readonly("output_dim", &NetworkSpec::output_dim)
        .def_readonly("width", &NetworkSpec::width)
        .def_readonly("hidden_count", &NetworkSpec::hidden_count);

    py::class_<Network>(m, "Network")
        .def(py::init([](const NetworkSpec& s, std::uint64_t seed, double init_std) {
                 Rng rng(seed);
                 return Network(s, rng, init_std);
             }),
             py::arg("spec"), py::arg("seed") = 0, py::arg("init_std") = 0.01)
        .def_property_readonly("spec", &Network::spec)
        .def_property_readonly("hidden_layers", [](const Network& n) { return n.hidden_layers().size(); })
        .def_property_readonly("interface_count", &Network::interface_count)
        .def_property_readonly("param_count", &Network::param_count)
        .def("parameters", &Network::parameters)
        .def("set_parameters", [](Network& n, const std::vector<double>& p) { n.set_parameters(p); })
        .def("predict", [](const Network& n, const Array& x) {
            Dataset d;
            d.inputs = to_matrix(x);
            d.labels = Matrix(d.inputs.rows(), n.spec().output_dim);
            return to_array(forward(n, d).output);
        })
        .def("loss", [](const Network& n, const Dataset& d) { return evaluate_loss(n, d); })
        .def("gradient", [](const Network& n, const Dataset& d) { return loss_gradient(n, d); })
        .def("insert", [](const Network& n, std::size_t l, const std::vector<double>& dir,
                          double eps) { return insert_layer(n, l, dir, eps); },
             py::arg("interface"), py::arg("direction"), py::arg("eps"))
        .def("save", [](const Network& n, const std::string& p) { save_checkpoint(n, p); })
        .def_static("load", [](const std::string& p) { return load_checkpoint(std::filesystem::path(p)); });

    py::class_<RbfChain>(m, "RbfChain")
        .def_readonly("center", &RbfChain::center)
        .def_property_readonly("layers", [](const RbfChain& c) { return c.layers.size(); })
        .def("parameters", &RbfChain::parameters)
        .def("loss", [](const RbfChain& c, const Dataset& d) { return rbf_loss(c, d); });
    m.def("gen_rbf_dataset",
          [](std::uint64_t seed, std::size_t train, std::size_t val, std::size_t test, std::size_t depth,
             double center) {
              RbfProblem p = gen_rbf_dataset(seed, train, val, test, depth, center);
              return py::make_tuple(p.splits.train, p.splits.validation, p.splits.test);
          },
          py::arg("seed"), py::arg("train") = 5000, py::arg("val") = 500, py::arg("test") = 1000,
          py::arg("depth") = 15, py::arg("center") = 0.1);

    m.def("scan_json",
          [](const Network& n, const Dataset& d, std::size_t m, std::optional<double> eps_s) {
              const WidthRule rule = eps_s ? WidthRule::automatic(*eps_s) : WidthRule::fixed(m);
              return report_to_json(scan(n, d, rule));
          },
          py::arg("net"), py::arg("data"), py::arg("m") = 1, py::arg("eps_s") = py::none());
    m.def("rbf_scan_json", [](const RbfChain& c, const Dataset& d) { return report_to_json(rbf_scan(c, d)); });
    m.def("transfer_rank", [](const Network& n, const Dataset& d) {
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& r : transfer_rank(n, d)) out.emplace_back(r.interface, r.lambda);
        return out;
    });
    m.def("max_gradient_error", [](std::uint64_t seed, std::size_t nets) {
        return gradcheck_sweep(seed, nets).max_rel_error;
    }, py::arg("seed") = 0, py::arg("networks") = 50);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("n", &TrainConfig::n)
        .def_readwrite("m", &TrainConfig::m)
        .def_readwrite("max_iters", &TrainConfig::max_iters)
        .def_readwrite("init_layers", &TrainConfig::init_layers)
        .def_readwrite("sparsity", &TrainConfig::sparsity)
        .def_readwrite("epochs_base", &TrainConfig::epochs_base)
        .def_readwrite("epochs_step", &TrainConfig::epochs_step)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("eps", &TrainConfig::eps)
        .def_readwrite("eps_threshold", &TrainConfig::eps_threshold)
        .def_readwrite("tau1", &TrainConfig::tau1)
        .def_readwrite("eps_s", &TrainConfig::eps_s)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("sigma_n", &TrainConfig::sigma_n)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("activation_pair", &TrainConfig::activation_pair)
        .def_readwrite("max_stage_epochs", &TrainConfig::max_stage_epochs)
        .def_readwrite("line_search_cap", &TrainConfig::line_search_cap)
        .def_readwrite("probe_eps", &TrainConfig::probe_eps)
        .def("validate", &TrainConfig::validate);

    m.def("grow",
          [](const std::string& strategy, const TrainConfig& cfg, const Dataset& train, const Dataset& val,
             const std::optional<Dataset>& test) {
              const DataSplits d = splits(train, val, test);
              py::gil_scoped_release release;
              const Strategy s = parse_strategy(strategy);
              GrowthResult<Network> r = s == Strategy::Semi   ? grow_semi(cfg, d)
                                        : s == Strategy::Auto ? grow_auto(cfg, d)
                                                              : grow_baseline(strategy, cfg, d);
              py::gil_scoped_acquire acquire;
              return result_dict(r);
          },
          py::arg("strategy"), py::arg("config"), py::arg("train"), py::arg("val"), py::arg("test") = py::none());
    m.def("grow_rbf",
          [](const std::string& strategy, const TrainConfig& cfg, const Dataset& train, const Dataset& val,
             double center) {
              const DataSplits d = splits(train, val, std::nullopt);
              py::gil_scoped_release release;
              GrowthResult<RbfChain> r = grow_rbf(strategy, cfg, d, center);
              py::gil_scoped_acquire acquire;
              return result_dict(r);
          },
          py::arg("strategy"), py::arg("config"), py::arg("train"), py::arg("val"), py::arg("center") = 0.1);

    m.def("cli", [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"grownet"};
        full.insert(full.end(), args.begin(), args.end());
        return cli::run(full);
    });
}
