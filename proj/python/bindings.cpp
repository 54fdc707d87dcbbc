// Python module exposing the toolkit's main operations: classical tone
// mapping, the quality metric, preference statistics, HDR/LDR file IO, and
// checkpoint inference. Images cross the boundary as numpy float arrays,
// (h, w) or (h, w, c) with c in {1, 3}.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "tonematch/common.hpp"
#include "tonematch/gan.hpp"
#include "tonematch/image.hpp"
#include "tonematch/io.hpp"
#include "tonematch/stats.hpp"
#include "tonematch/tmo.hpp"
#include "tonematch/tmqi.hpp"

namespace py = pybind11;
using namespace tonematch;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

HdrImage hdr_from_array(const FloatArray& arr) {
  const py::buffer_info info = arr.request();
  int channels = 1;
  if (info.ndim == 3) {
    channels = static_cast<int>(info.shape[2]);
  } else if (info.ndim != 2) {
    throw DataError("expected a (h, w) or (h, w, c) array");
  }
  if (channels != 1 && channels != 3)
    throw DataError("expected 1 or 3 channels, got " + std::to_string(channels));
  HdrImage img(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]), channels);
  const float* src = static_cast<const float*>(info.ptr);
  std::copy(src, src + img.data.size(), img.data.begin());
  img.validate();
  return img;
}

Raster raster_from_array(const FloatArray& arr) {
  const py::buffer_info info = arr.request();
  if (info.ndim != 2) throw DataError("expected a (h, w) array");
  Raster r(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]));
  const float* src = static_cast<const float*>(info.ptr);
  std::copy(src, src + r.data.size(), r.data.begin());
  return r;
}

py::array ldr_to_array(const LdrImage& img) {
  if (img.channels == 1) {
    py::array_t<float> out({img.height, img.width});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
  }
  py::array_t<float> out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

py::array raster_to_array(const Raster& r) {
  py::array_t<float> out({r.height, r.width});
  std::copy(r.data.begin(), r.data.end(), out.mutable_data());
  return out;
}

LdrImage ldr_from_array(const FloatArray& arr) {
  const py::buffer_info info = arr.request();
  int channels = 1;
  if (info.ndim == 3) {
    channels = static_cast<int>(info.shape[2]);
  } else if (info.ndim != 2) {
    throw DataError("expected a (h, w) or (h, w, c) array");
  }
  LdrImage img(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]), channels);
  const float* src = static_cast<const float*>(info.ptr);
  std::copy(src, src + img.data.size(), img.data.begin());
  img.validate();
  return img;
}

TmoId tmo_id_checked(const std::string& name) {
  if (const auto id = tmo_from_name(name)) return *id;
  throw DataError("unknown operator '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tone-mapping toolkit core";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("tmo_names", [] {
    std::vector<std::string> names;
    for (TmoId id : all_tmo_ids()) names.emplace_back(tmo_name(id));
    return names;
  }, "Names of the classical operators, in registry order.");

  m.def("describe_tmos", &describe_tmos,
        "Human-readable table of operators and their tunable parameters.");

  m.def(
      "apply_tmo",
      [](const std::string& op, const FloatArray& hdr, float saturation,
         const std::map<std::string, double>& params) {
        TmoParams p;
        p.values = params;
        return ldr_to_array(apply_tmo_color(tmo_id_checked(op), p,
                                            hdr_from_array(hdr), saturation));
      },
      py::arg("op"), py::arg("hdr"), py::arg("saturation") = 1.0f,
      py::arg("params") = std::map<std::string, double>{},
      "Tone-map a scene-referred image to display range with a classical "
      "operator; returns floats in [0, 1] with the input's shape.");

  m.def(
      "apply_tmo_lum",
      [](const std::string& op, const FloatArray& lum,
         const std::map<std::string, double>& params) {
        TmoParams p;
        p.values = params;
        return raster_to_array(apply_tmo(tmo_id_checked(op), p, raster_from_array(lum)));
      },
      py::arg("op"), py::arg("lum"), py::arg("params") = std::map<std::string, double>{},
      "Luminance-plane variant of apply_tmo.");

  m.def(
      "tmqi",
      [](const FloatArray& hdr_lum, const FloatArray& ldr_lum) {
        const TmqiReport rep = tmqi(raster_from_array(hdr_lum), raster_from_array(ldr_lum));
        return py::make_tuple(rep.structural, rep.naturalness, rep.score);
      },
      py::arg("hdr_lum"), py::arg("ldr_lum"),
      "Quality of a rendition against its scene: returns (S, N, Q).");

  m.def(
      "luminance",
      [](const FloatArray& hdr) { return raster_to_array(luminance(hdr_from_array(hdr))); },
      py::arg("hdr"), "Scene luminance plane of an RGB or single-channel image.");

  m.def("preference_prob", &preference_prob, py::arg("wins"), py::arg("ties"),
        py::arg("n"), "Empirical preference probability with ties split evenly.");

  m.def("binomial_cdf", &binomial_cdf, py::arg("k"), py::arg("n"), py::arg("p"),
        "P[X <= k] for X ~ Binomial(n, p).");

  m.def(
      "significance_thresholds",
      [](int n, double gamma) {
        const SignificanceThresholds th = significance_thresholds(n, gamma);
        return py::make_tuple(th.favored_at, th.disfavored_at);
      },
      py::arg("n"), py::arg("gamma") = 0.95,
      "Two-sided (favored_at, disfavored_at) win-count thresholds.");

  m.def(
      "read_hdr",
      [](const std::string& path) {
        const HdrImage img = read_hdr(path);
        py::array_t<float> out({img.height, img.width, img.channels});
        std::copy(img.data.begin(), img.data.end(), out.mutable_data());
        return out;
      },
      py::arg("path"), "Read a .hdr or .pfm file as a (h, w, c) float array.");

  m.def(
      "write_hdr",
      [](const std::string& path, const FloatArray& hdr, const std::string& format) {
        ImageFileFormat f;
        if (format == "pfm") f = ImageFileFormat::kPfm;
        else if (format == "hdr") f = ImageFileFormat::kRadianceHdr;
        else throw DataError("format must be 'pfm' or 'hdr'");
        write_hdr(hdr_from_array(hdr), path, f);
      },
      py::arg("path"), py::arg("hdr"), py::arg("format") = "pfm",
      "Write a scene-referred image.");

  m.def(
      "write_png",
      [](const std::string& path, const FloatArray& ldr) {
        write_png8(ldr_from_array(ldr), path);
      },
      py::arg("path"), py::arg("ldr"),
      "Write a display-referred [0, 1] image as 8-bit PNG.");

  m.def(
      "read_png",
      [](const std::string& path) { return ldr_to_array(read_png8(path)); },
      py::arg("path"), "Read an 8-bit PNG back to floats in [0, 1].");

  m.def(
      "infer",
      [](const std::string& ckpt, const FloatArray& hdr, float saturation) {
        return ldr_to_array(gan::infer(ckpt, hdr_from_array(hdr), saturation));
      },
      py::arg("ckpt"), py::arg("hdr"), py::arg("saturation") = 1.0f,
      "Tone-map with a trained checkpoint; returns floats in [0, 1].");
}
