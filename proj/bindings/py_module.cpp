#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "dift/boundary.h"
#include "dift/errors.h"
#include "dift/heatmap.h"
#include "dift/image.h"
#include "dift/model.h"
#include "dift/rng.h"
#include "dift/saccade.h"
#include "dift/sampler.h"
#include "dift/score.h"
#include "dift/trainer.h"

namespace py = pybind11;
using namespace dift;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

ImageBuf image_from_array(const U8Array& a) {
  if (a.ndim() == 2) {
    ImageBuf img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 1);
    std::memcpy(img.data.data(), a.data(), img.data.size());
    return img;
  }
  if (a.ndim() == 3 && a.shape(2) == 3) {
    ImageBuf img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 3);
    std::memcpy(img.data.data(), a.data(), img.data.size());
    return img;
  }
  throw DataError("image array must be [H,W] gray or [H,W,3] rgb uint8");
}

py::array image_to_array(const ImageBuf& img) {
  std::vector<py::ssize_t> shape = {img.height, img.width};
  if (img.channels == 3) shape.push_back(3);
  py::array_t<std::uint8_t> a(shape);
  std::memcpy(a.mutable_data(), img.data.data(), img.data.size());
  return a;
}

Tensor tensor_from_array(const F32Array& a) {
  if (a.ndim() < 1 || a.ndim() > 4) throw DimError("tensor array rank must be 1..4");
  std::vector<int> dims;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) dims.push_back(static_cast<int>(a.shape(i)));
  Tensor t(dims);
  std::memcpy(t.data.data(), a.data(), t.numel() * sizeof(float));
  return t;
}

py::array tensor_to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
  py::array_t<float> a(shape);
  std::memcpy(a.mutable_data(), t.data.data(), t.numel() * sizeof(float));
  return a;
}

LandmarkChannels landmarks_from_py(const py::object& obj) {
  LandmarkChannels out;
  const py::object items = py::isinstance<py::dict>(obj) ? obj.attr("items")() : obj;
  for (py::handle entry : items) {
    auto pair = entry.cast<std::pair<std::string, std::vector<std::pair<int, int>>>>();
    std::vector<Point> pts;
    pts.reserve(pair.second.size());
    for (auto [x, y] : pair.second) pts.push_back({x, y});
    out.channels.emplace_back(std::move(pair.first), std::move(pts));
  }
  return out;
}

py::dict landmarks_to_py(const LandmarkChannels& lms) {
  py::dict d;
  for (const auto& [name, pts] : lms.channels) {
    py::list l;
    for (Point p : pts) l.append(py::make_tuple(p.x, p.y));
    d[py::str(name)] = l;
  }
  return d;
}

ScoreParams score_params(double d_inner, double d_outer, double s_knee) {
  ScoreParams p{d_inner, d_outer, s_knee};
  p.validate();
  return p;
}

InitScheme scheme_from_name(const std::string& name) {
  if (name == "fanin") return InitScheme::FanIn;
  if (name == "glorot") return InitScheme::Glorot;
  throw DataError("init scheme must be 'fanin' or 'glorot'");
}

std::vector<LabeledImage> dataset_from_py(const py::list& items) {
  std::vector<LabeledImage> out;
  out.reserve(items.size());
  for (py::handle h : items) {
    auto [img, lms, id] = h.cast<std::tuple<U8Array, py::object, std::string>>();
    LabeledImage item;
    item.image = image_from_array(img);
    item.landmarks = landmarks_from_py(lms);
    item.id = id;
    out.push_back(std::move(item));
  }
  return out;
}

py::list detections_to_py(const std::vector<Detection>& dets) {
  py::list l;
  for (const Detection& d : dets) {
    py::dict e;
    e["channel"] = d.channel;
    e["x"] = d.point.x;
    e["y"] = d.point.y;
    e["score"] = d.score;
    e["evals"] = d.evals_used;
    l.append(e);
  }
  return l;
}

}  // namespace

PYBIND11_MODULE(_dift, m) {
  m.doc() = "Distance-to-feature patch scoring: training, heatmaps, saccaded detection";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<DimError>(m, "DimError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "score_fn",
      [](double d, double d_inner, double d_outer, double s_knee) {
        return score_fn(d, score_params(d_inner, d_outer, s_knee));
      },
      py::arg("d"), py::arg("d_inner") = 20.0, py::arg("d_outer") = 40.0,
      py::arg("s_knee") = 0.25);

  m.def(
      "euclid_dist",
      [](std::pair<int, int> a, std::pair<int, int> b) {
        return euclid_dist({a.first, a.second}, {b.first, b.second});
      },
      py::arg("p1"), py::arg("p2"));

  m.def(
      "target_vector",
      [](std::pair<int, int> p, const py::object& landmarks, double d_inner, double d_outer,
         double s_knee) {
        const std::vector<double> t = target_vector({p.first, p.second},
                                                    landmarks_from_py(landmarks),
                                                    score_params(d_inner, d_outer, s_knee));
        return py::array_t<double>(static_cast<py::ssize_t>(t.size()), t.data());
      },
      py::arg("point"), py::arg("landmarks"), py::arg("d_inner") = 20.0,
      py::arg("d_outer") = 40.0, py::arg("s_knee") = 0.25);

  m.def(
      "synth_image",
      [](std::uint64_t seed) {
        LabeledImage item = synth_image(seed);
        return py::make_tuple(image_to_array(item.image), landmarks_to_py(item.landmarks),
                              item.id);
      },
      py::arg("seed"), "Labeled synthetic scene -> (image, landmarks, id)");

  py::class_<Model>(m, "Model")
      .def_static(
          "init",
          [](int patch_size, int out_channels, float dropout, std::uint64_t seed,
             const std::string& scheme) {
            ArchConfig arch;
            arch.patch_size = patch_size;
            arch.out_channels = out_channels;
            arch.dropout = dropout;
            Rng rng = Rng(seed).fork(0);
            return init_model(arch, rng, scheme_from_name(scheme));
          },
          py::arg("patch_size") = 35, py::arg("out_channels") = 3, py::arg("dropout") = 0.0f,
          py::arg("seed") = 0, py::arg("scheme") = "glorot")
      .def_static(
          "load", [](const std::string& path) { return load_model(path); }, py::arg("path"))
      .def("save", [](const Model& self, const std::string& path) { save_model(self, path); },
           py::arg("path"))
      .def_property_readonly("patch_size", [](const Model& self) { return self.arch.patch_size; })
      .def_property_readonly("out_channels",
                             [](const Model& self) { return self.arch.out_channels; })
      .def_property_readonly("dropout", [](const Model& self) { return self.arch.dropout; })
      .def_property_readonly("param_count", [](const Model& self) { return param_count(self); })
      .def(
          "forward",
          [](const Model& self, const F32Array& batch) {
            Tensor t = tensor_from_array(batch);
            const bool single = t.rank() == 3;
            if (single) t.set_dims({1, t.dim(0), t.dim(1), t.dim(2)});
            Tensor out = forward(self, t, Mode::Infer);
            if (single) out.set_dims({out.dim(1)});
            return tensor_to_array(out);
          },
          py::arg("batch"), "Inference on [3,S,S] or [B,3,S,S] float32, values in [0,1]")
      .def(
          "grad_check",
          [](const Model& self, const F32Array& patch, const F32Array& target, double eps) {
            return grad_check(self, tensor_from_array(patch), tensor_from_array(target), eps);
          },
          py::arg("patch"), py::arg("target"), py::arg("eps") = 1e-3);

  m.def(
      "train",
      [](Model& model, const py::list& dataset, int batches, int batchsize, float lr,
         float momentum, std::uint64_t seed, int patch_size, const std::string& sampling) {
        TrainConfig cfg;
        cfg.batches = batches;
        cfg.batchsize = batchsize;
        cfg.lr = lr;
        cfg.momentum = momentum;
        cfg.seed = seed;
        cfg.patch = PatchSpec(patch_size);
        if (sampling == "saccade")
          cfg.sampling = TrainConfig::Sampling::SaccadeCentered;
        else if (sampling != "uniform")
          throw DataError("sampling must be 'uniform' or 'saccade'");
        LossTrace trace = train(model, dataset_from_py(dataset), cfg);
        return py::make_tuple(
            py::array_t<double>(static_cast<py::ssize_t>(trace.losses.size()),
                                trace.losses.data()),
            py::array_t<double>(static_cast<py::ssize_t>(trace.running_mean.size()),
                                trace.running_mean.data()));
      },
      py::arg("model"), py::arg("dataset"), py::arg("batches") = 2000, py::arg("batchsize") = 32,
      py::arg("lr") = 0.05f, py::arg("momentum") = 0.9f, py::arg("seed") = 0,
      py::arg("patch_size") = 35, py::arg("sampling") = "uniform",
      "Train in place on [(image, landmarks, id), ...]; returns (losses, running_mean)");

  m.def(
      "dense_heatmap",
      [](const Model& model, const U8Array& image, int threads) {
        const ScoreField f = dense_heatmap(model, image_from_array(image), threads);
        py::array_t<float> a({f.channels, f.height, f.width});
        std::memcpy(a.mutable_data(), f.data.data(), f.data.size() * sizeof(float));
        return py::make_tuple(a, f.border);
      },
      py::arg("model"), py::arg("image"), py::arg("threads") = 1,
      "Score every valid patch center -> ([C,H,W] float32, border)");

  m.def(
      "boundary_chains",
      [](const U8Array& image, int window, int min_contrast) {
        const BoundaryChains bc = boundary_chains(image_from_array(image), window, min_contrast);
        py::list chains;
        for (const auto& chain : bc.chains) {
          py::array_t<int> a({static_cast<py::ssize_t>(chain.size()), py::ssize_t{2}});
          auto w = a.mutable_unchecked<2>();
          for (py::ssize_t i = 0; i < w.shape(0); ++i) {
            w(i, 0) = chain[static_cast<std::size_t>(i)].x;
            w(i, 1) = chain[static_cast<std::size_t>(i)].y;
          }
          chains.append(a);
        }
        return py::make_tuple(chains, bc.total_boundary_px);
      },
      py::arg("image"), py::arg("window") = kBoundaryWindow,
      py::arg("min_contrast") = kMinContrast,
      "Dark/light boundary chains -> ([N,2] x/y arrays, total boundary pixels)");

  m.def(
      "saccade_points",
      [](const U8Array& image, int stride, int border) {
        const BoundaryChains bc = boundary_chains(image_from_array(image));
        const std::vector<Point> pts = saccade_points(bc, stride, border);
        py::array_t<int> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
        auto w = a.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < w.shape(0); ++i) {
          w(i, 0) = pts[static_cast<std::size_t>(i)].x;
          w(i, 1) = pts[static_cast<std::size_t>(i)].y;
        }
        return a;
      },
      py::arg("image"), py::arg("stride") = kSaccadeStride, py::arg("border") = 17,
      "Interest points subsampled along boundary chains as [M,2] x/y");

  m.def(
      "detect",
      [](const Model& model, const U8Array& image, const std::string& mode, float threshold,
         double nms_radius, int threads) {
        DetectMode dm;
        if (mode == "dense")
          dm = DetectMode::Dense;
        else if (mode == "saccade")
          dm = DetectMode::Saccade;
        else
          throw DataError("mode must be 'dense' or 'saccade'");
        const DetectResult r = detect(model, image_from_array(image), dm, threshold, nms_radius,
                                      threads);
        py::dict out;
        out["detections"] = detections_to_py(r.detections);
        out["total_evals"] = r.total_evals;
        return out;
      },
      py::arg("model"), py::arg("image"), py::arg("mode") = "saccade",
      py::arg("threshold") = kDetectThreshold, py::arg("nms_radius") = kNmsRadius,
      py::arg("threads") = 1);

  m.def(
      "hill_climb",
      [](const Model& model, const U8Array& image, std::pair<int, int> start, int channel) {
        const ClimbResult r =
            hill_climb(model, image_from_array(image), {start.first, start.second}, channel);
        return py::make_tuple(py::make_tuple(r.point.x, r.point.y), r.score, r.evals);
      },
      py::arg("model"), py::arg("image"), py::arg("start"), py::arg("channel"),
      "Coarse-to-fine ascent from start -> ((x, y), score, evals)");
}
