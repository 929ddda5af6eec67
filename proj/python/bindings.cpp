// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mpogpt/data.hpp"
#include "mpogpt/errors.hpp"
#include "mpogpt/factorize.hpp"
#include "mpogpt/io.hpp"
#include "mpogpt/model.hpp"
#include "mpogpt/mpo.hpp"
#include "mpogpt/train.hpp"

namespace py = pybind11;
using namespace mpogpt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

TensorD to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return TensorD(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const TensorD& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

MpoCoresD to_cores(const std::vector<Array>& cores) {
  MpoCoresD mpo;
  for (const auto& c : cores) mpo.cores.push_back(to_tensor(c));
  mpo.validate();
  return mpo;
}

std::vector<Array> from_cores(const MpoCoresD& mpo) {
  std::vector<Array> out;
  for (const auto& c : mpo.cores) out.push_back(to_array(c));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MPO compression and character-level GPT training";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  py::class_<FactorizationPlan>(m, "FactorizationPlan")
      .def(py::init([](std::vector<std::size_t> d_out, std::vector<std::size_t> d_in, std::size_t chi) {
             FactorizationPlan p{std::move(d_out), std::move(d_in), chi};
             p.validate();
             return p;
           }),
           py::arg("d_out"), py::arg("d_in"), py::arg("chi"))
      .def_readwrite("d_out", &FactorizationPlan::d_out)
      .def_readwrite("d_in", &FactorizationPlan::d_in)
      .def_readwrite("chi", &FactorizationPlan::chi)
      .def_property_readonly("out", &FactorizationPlan::out)
      .def_property_readonly("in_", &FactorizationPlan::in)
      .def("__eq__", [](const FactorizationPlan& a, const FactorizationPlan& b) { return a == b; })
      .def("__repr__", [](const FactorizationPlan& p) {
        return "FactorizationPlan(d_out=" + shape_str(p.d_out) + ", d_in=" + shape_str(p.d_in) +
               ", chi=" + std::to_string(p.chi) + ")";
      });

  m.def("bond_dims", &bond_dims, py::arg("plan"));
  m.def("param_count", py::overload_cast<const FactorizationPlan&>(&param_count), py::arg("plan"));
  m.def("init_scale", &init_scale, py::arg("plan"), py::arg("n_in"));
  m.def(
      "plan_balanced",
      [](std::size_t out, std::size_t in, std::size_t sites, std::size_t chi) {
        return plan_balanced(PlanRequest{out, in, sites, chi});
      },
      py::arg("out"), py::arg("in_"), py::arg("sites"), py::arg("chi"));
  m.def(
      "plan_min_params",
      [](std::size_t out, std::size_t in, std::size_t sites, std::size_t chi) {
        return plan_min_params(PlanRequest{out, in, sites, chi});
      },
      py::arg("out"), py::arg("in_"), py::arg("sites"), py::arg("chi"));
  m.def("enumerate_factorizations", &enumerate_factorizations, py::arg("n"), py::arg("sites"));

  m.def(
      "truncated_svd",
      [](const Array& a, std::size_t max_rank) {
        auto r = truncated_svd(to_tensor(a), max_rank);
        return py::make_tuple(to_array(r.u), r.s, to_array(r.vt), r.discarded_sq);
      },
      py::arg("m"), py::arg("max_rank"), "Returns (u, s, vt, discarded_sq).");
  m.def(
      "relative_error", [](const Array& w, const Array& w_hat) { return relative_error(to_tensor(w), to_tensor(w_hat)); },
      py::arg("w"), py::arg("w_hat"));

  m.def(
      "tt_svd",
      [](const Array& w, const FactorizationPlan& plan) {
        auto r = tt_svd(to_tensor(w), plan);
        return py::make_tuple(from_cores(r.cores), r.discarded_sq);
      },
      py::arg("w"), py::arg("plan"), "Returns (cores, discarded_sq per unfolding).");
  m.def(
      "reconstruct", [](const std::vector<Array>& cores) { return to_array(reconstruct(to_cores(cores))); },
      py::arg("cores"));
  m.def(
      "apply_direct",
      [](const std::vector<Array>& cores, const Array& x) { return to_array(apply_direct(to_cores(cores), to_tensor(x))); },
      py::arg("cores"), py::arg("x"));
  m.def(
      "environment_gradient",
      [](const std::vector<Array>& cores, const Array& upstream, std::size_t site) {
        return to_array(environment_gradient(to_cores(cores), to_tensor(upstream), site));
      },
      py::arg("cores"), py::arg("upstream"), py::arg("site"));
  m.def(
      "random_init", [](const FactorizationPlan& plan, std::uint64_t seed) { return from_cores(random_init<double>(plan, seed)); },
      py::arg("plan"), py::arg("seed"));

  m.def(
      "sinusoidal_pe", [](std::size_t length, std::size_t dim) { return to_array(sinusoidal_pe<double>(length, dim)); },
      py::arg("length"), py::arg("dim"));
  m.def(
      "lr_at",
      [](std::size_t step, std::size_t steps, std::size_t warmup, double lr_max, double lr_min) {
        TrainConfig cfg;
        cfg.steps = steps;
        cfg.warmup = warmup;
        cfg.lr_max = lr_max;
        cfg.lr_min = lr_min;
        return lr_at(step, cfg);
      },
      py::arg("step"), py::arg("steps") = 2000, py::arg("warmup") = 100, py::arg("lr_max") = 3e-4,
      py::arg("lr_min") = 0.0);

  py::class_<CharVocab>(m, "CharVocab")
      .def(py::init([](const std::string& text) { return build_vocab(text); }), py::arg("text"))
      .def("__len__", &CharVocab::size)
      .def_property_readonly("chars", [](const CharVocab& v) { return utf8_encode(v.chars()); })
      .def("encode", &CharVocab::encode, py::arg("text"))
      .def("decode", [](const CharVocab& v, const std::vector<std::int32_t>& ids) { return v.decode(ids); },
           py::arg("ids"));

  py::class_<LayerError>(m, "LayerError")
      .def_readonly("layer", &LayerError::layer)
      .def_readonly("chi", &LayerError::chi)
      .def_readonly("rel_err", &LayerError::rel_err)
      .def_readonly("params_dense", &LayerError::params_dense)
      .def_readonly("params_mpo", &LayerError::params_mpo);

  py::class_<TransformerF>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& path) { return load_checkpoint(path).model; }, py::arg("path"))
      .def_static(
          "random",
          [](std::size_t vocab, std::size_t embed, std::size_t heads, std::size_t layers, std::size_t context,
             std::uint64_t seed) {
            ModelConfig cfg;
            cfg.vocab = vocab;
            cfg.embed = embed;
            cfg.heads = heads;
            cfg.layers = layers;
            cfg.context = context;
            return TransformerF::init(cfg, seed);
          },
          py::arg("vocab") = 65, py::arg("embed") = 128, py::arg("heads") = 4, py::arg("layers") = 4,
          py::arg("context") = 256, py::arg("seed") = 0)
      .def_property_readonly("mode", [](const TransformerF& m) { return std::string(to_string(m.config().mode)); })
      .def_property_readonly("param_count", &TransformerF::param_count)
      .def("parameter_names",
           [](const TransformerF& m) {
             std::vector<std::string> names;
             for (const auto& p : m.params()) names.push_back(p.name);
             return names;
           })
      .def(
          "logits",
          [](const TransformerF& m, const std::vector<std::vector<std::int32_t>>& rows) {
            if (rows.empty()) throw InputError("empty batch");
            TokenBatch tb{rows.size(), rows.front().size(), {}};
            for (const auto& r : rows) {
              if (r.size() != tb.len) throw InputError("rows must have equal length");
              tb.ids.insert(tb.ids.end(), r.begin(), r.end());
            }
            return to_array(m.logits(tb).cast<double>());
          },
          py::arg("tokens"))
      .def(
          "compress",
          [](const TransformerF& m, std::size_t chi) {
            auto c = compress_model(m, chi);
            return py::make_tuple(std::move(c.model), c.layers);
          },
          py::arg("chi"), "Returns (mpo_model, per-layer errors).")
      .def(
          "reconstruction_errors", [](const TransformerF& m, std::size_t chi) { return reconstruction_errors(m, chi); },
          py::arg("chi"))
      .def(
          "generate",
          [](const TransformerF& m, const std::vector<std::int32_t>& prompt, std::size_t length, double temperature,
             std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return generate(m, prompt, length, temperature, rng);
          },
          py::arg("prompt"), py::arg("length"), py::arg("temperature") = 0.0, py::arg("seed") = 0);
}
