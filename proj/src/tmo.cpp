// Global tone-mapping operators and the dispatch/validation layer.
// Durand and Fattal live in their own translation units.

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tonematch/tmo.hpp"

namespace tonematch {

Raster durand_tmo(const Raster& lum, const TmoParams& p);
Raster fattal_tmo(const Raster& lum, const TmoParams& p);

std::vector<TmoId> all_tmo_ids() {
  return {TmoId::kGamma,  TmoId::kLog,   TmoId::kWard,
          TmoId::kTumblin, TmoId::kSchlick, TmoId::kDrago,
          TmoId::kReinhardGlobal, TmoId::kDurand, TmoId::kFattal};
}

const char* tmo_name(TmoId id) {
  switch (id) {
    case TmoId::kGamma: return "gamma";
    case TmoId::kLog: return "log";
    case TmoId::kWard: return "ward";
    case TmoId::kTumblin: return "tumblin";
    case TmoId::kSchlick: return "schlick";
    case TmoId::kDrago: return "drago";
    case TmoId::kReinhardGlobal: return "reinhard";
    case TmoId::kDurand: return "durand";
    case TmoId::kFattal: return "fattal";
  }
  return "?";
}

std::optional<TmoId> tmo_from_name(const std::string& name) {
  for (TmoId id : all_tmo_ids()) {
    if (name == tmo_name(id)) return id;
  }
  return std::nullopt;
}

TmoParams tmo_defaults(TmoId id) {
  switch (id) {
    case TmoId::kGamma:
      return {{"gamma", 2.2}};
    case TmoId::kLog:
      return {{"k", 1.0}};
    case TmoId::kWard:
      return {{"ldmax", 100.0}};
    case TmoId::kTumblin:
      return {{"lda", 30.0}, {"ldmax", 100.0}, {"cmax", 100.0}};
    case TmoId::kSchlick:
      return {{"p", 200.0}};
    case TmoId::kDrago:
      return {{"bias", 0.85}, {"ldmax", 100.0}};
    case TmoId::kReinhardGlobal:
      return {{"key", 0.18}, {"lwhite", 0.0}, {"delta", 1e-6}};
    case TmoId::kDurand:
      return {{"contrast", 50.0}, {"sigma_r", 0.4}, {"sigma_s_frac", 0.02}};
    case TmoId::kFattal:
      return {{"alpha_frac", 0.1}, {"beta", 0.85}, {"levels", 4.0},
              {"tol", 1e-4}, {"max_iters", 10000.0}};
  }
  return {};
}

std::string describe_tmos() {
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s += std::string(w - s.size(), ' ');
    return s;
  };
  std::ostringstream os;
  os << pad("operator", 12) << pad("parameter", 14) << "default\n";
  os << pad("--------", 12) << pad("---------", 14) << "-------\n";
  for (TmoId id : all_tmo_ids()) {
    bool first = true;
    for (const auto& [key, value] : tmo_defaults(id).values) {
      std::ostringstream v;
      v << value;
      os << pad(first ? tmo_name(id) : "", 12) << pad(key, 14) << v.str() << "\n";
      first = false;
    }
  }
  return os.str();
}

namespace {

TmoParams merged_params(TmoId id, const TmoParams& user) {
  TmoParams defs = tmo_defaults(id);
  for (const auto& [key, value] : user.values) {
    if (defs.values.find(key) == defs.values.end()) {
      throw DataError(std::string("apply_tmo: unknown parameter '") + key + "' for operator " +
                      tmo_name(id));
    }
    if (!std::isfinite(value)) {
      throw DataError(std::string("apply_tmo: non-finite value for parameter '") + key + "'");
    }
    defs.values[key] = value;
  }
  return defs;
}

// Epsilon guard: zeros lifted to 1e-9 so log/division based operators are
// safe; anything negative or non-finite is a caller bug.
Raster guarded(const Raster& lum) {
  if (lum.width <= 0 || lum.height <= 0) throw DataError("apply_tmo: empty raster");
  Raster out(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const float v = lum.data[i];
    if (!std::isfinite(v)) {
      throw DataError("apply_tmo: non-finite luminance at pixel " + std::to_string(i));
    }
    if (v < 0.0f) {
      throw DataError("apply_tmo: negative luminance at pixel " + std::to_string(i));
    }
    out.data[i] = v == 0.0f ? 1e-9f : v;
  }
  return out;
}

float max_of(const Raster& r) {
  float m = r.data[0];
  for (float v : r.data) m = std::max(m, v);
  return m;
}

// exp(mean(ln L)); inputs are strictly positive after the guard.
double log_average(const Raster& r, double delta = 0.0) {
  double acc = 0.0;
  for (float v : r.data) acc += std::log(static_cast<double>(v) + delta);
  return std::exp(acc / static_cast<double>(r.size()));
}

Raster gamma_tmo(const Raster& lum, const TmoParams& p) {
  const double g = p.get("gamma", 2.2);
  if (!(g > 0.0)) throw DataError("gamma: exponent must be > 0");
  Raster n = normalize(lum, {NormalizationVariant::kLinear, 1e-6f});
  const float e = static_cast<float>(1.0 / g);
  for (float& v : n.data) v = std::pow(v, e);
  return n;
}

Raster log_tmo(const Raster& lum, const TmoParams& p) {
  const double k = p.get("k", 1.0);
  if (!(k > 0.0)) throw DataError("log: k must be > 0");
  const double lmax = max_of(lum);
  const double denom = std::log(1.0 + k * lmax);
  Raster out(lum.width, lum.height);
  if (denom <= 0.0) return out;  // flat near-zero raster
  for (std::size_t i = 0; i < lum.size(); ++i) {
    out.data[i] = static_cast<float>(
        std::clamp(std::log(1.0 + k * lum.data[i]) / denom, 0.0, 1.0));
  }
  return out;
}

// Ward's visibility-matching scale factor; display value = m*L/ldmax.
Raster ward_tmo(const Raster& lum, const TmoParams& p) {
  const double ldmax = p.get("ldmax", 100.0);
  if (!(ldmax > 0.0)) throw DataError("ward: ldmax must be > 0");
  const double lwa = log_average(lum);
  const double num = 1.219 + std::pow(ldmax / 2.0, 0.4);
  const double den = 1.219 + std::pow(lwa, 0.4);
  const double m = std::pow(num / den, 2.5);
  Raster out(lum.width, lum.height);
  const double inv = m / ldmax;
  for (std::size_t i = 0; i < lum.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp(lum.data[i] * inv, 0.0, 1.0));
  }
  return out;
}

// Tumblin-Rushmeier brightness preservation via Stevens' power law.
double stevens_gamma(double l) {
  return l > 100.0 ? 2.655 : 1.855 + 0.4 * std::log10(l + 2.3e-5);
}

Raster tumblin_tmo(const Raster& lum, const TmoParams& p) {
  const double lda = p.get("lda", 30.0);
  const double ldmax = p.get("ldmax", 100.0);
  const double cmax = p.get("cmax", 100.0);
  if (!(lda > 0.0 && ldmax > 0.0 && cmax > 0.0)) {
    throw DataError("tumblin: lda/ldmax/cmax must be > 0");
  }
  const double lwa = log_average(lum);
  const double gamma_w = stevens_gamma(lwa);
  const double gamma_d = stevens_gamma(lda);
  const double gamma_wd = gamma_w / (1.855 + 0.4 * std::log10(lda));
  const double m = std::pow(cmax, (gamma_wd - 1.0) / 2.0);
  const double exponent = gamma_w / gamma_d;
  Raster out(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const double ld = lda * m * std::pow(lum.data[i] / lwa, exponent);
    out.data[i] = static_cast<float>(std::clamp(ld / ldmax, 0.0, 1.0));
  }
  return out;
}

// Schlick's rational quantization: p*L / (p*L - L + Lmax).
Raster schlick_tmo(const Raster& lum, const TmoParams& p) {
  const double pp = p.get("p", 200.0);
  if (!(pp >= 1.0)) throw DataError("schlick: p must be >= 1");
  const double lmax = max_of(lum);
  Raster out(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const double l = lum.data[i];
    out.data[i] = static_cast<float>(std::clamp(pp * l / (pp * l - l + lmax), 0.0, 1.0));
  }
  return out;
}

// Drago adaptive logarithmic mapping with bias-steered base interpolation.
Raster drago_tmo(const Raster& lum, const TmoParams& p) {
  const double bias = p.get("bias", 0.85);
  const double ldmax = p.get("ldmax", 100.0);
  if (!(bias > 0.0 && bias < 1.0)) throw DataError("drago: bias must lie in (0,1)");
  if (!(ldmax > 0.0)) throw DataError("drago: ldmax must be > 0");
  const double lwmax = max_of(lum);
  const double prefix = (ldmax * 0.01) / std::log10(1.0 + lwmax);
  const double bias_exp = std::log(bias) / std::log(0.5);
  Raster out(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const double l = lum.data[i];
    const double denom = std::log(2.0 + 8.0 * std::pow(l / lwmax, bias_exp));
    const double ld = prefix * std::log(1.0 + l) / denom;
    out.data[i] = static_cast<float>(std::clamp(ld, 0.0, 1.0));
  }
  return out;
}

// Reinhard's global photographic operator with the white-point roll-off.
Raster reinhard_tmo(const Raster& lum, const TmoParams& p) {
  const double key = p.get("key", 0.18);
  const double delta = p.get("delta", 1e-6);
  double lwhite = p.get("lwhite", 0.0);
  if (!(key > 0.0)) throw DataError("reinhard: key must be > 0");
  if (!(delta >= 0.0)) throw DataError("reinhard: delta must be >= 0");
  const double lbar = log_average(lum, delta);
  Raster out(lum.width, lum.height);
  const double s = key / lbar;
  if (lwhite <= 0.0) {
    // auto white point: the largest scaled luminance
    lwhite = max_of(lum) * s;
  }
  const double inv_w2 = 1.0 / (lwhite * lwhite);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const double ls = lum.data[i] * s;
    const double ld = ls * (1.0 + ls * inv_w2) / (1.0 + ls);
    out.data[i] = static_cast<float>(std::clamp(ld, 0.0, 1.0));
  }
  return out;
}

}  // namespace

Raster apply_tmo(TmoId id, const TmoParams& params, const Raster& hdr_lum) {
  const TmoParams p = merged_params(id, params);
  const Raster lum = guarded(hdr_lum);
  Raster out;
  switch (id) {
    case TmoId::kGamma: out = gamma_tmo(lum, p); break;
    case TmoId::kLog: out = log_tmo(lum, p); break;
    case TmoId::kWard: out = ward_tmo(lum, p); break;
    case TmoId::kTumblin: out = tumblin_tmo(lum, p); break;
    case TmoId::kSchlick: out = schlick_tmo(lum, p); break;
    case TmoId::kDrago: out = drago_tmo(lum, p); break;
    case TmoId::kReinhardGlobal: out = reinhard_tmo(lum, p); break;
    case TmoId::kDurand: out = durand_tmo(lum, p); break;
    case TmoId::kFattal: out = fattal_tmo(lum, p); break;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out.data[i])) {
      throw NumericError(std::string("apply_tmo: ") + tmo_name(id) +
                         " produced a non-finite value at pixel " + std::to_string(i));
    }
  }
  return out;
}

LdrImage apply_tmo_color(TmoId id, const TmoParams& params, const HdrImage& hdr,
                         float saturation) {
  const Raster lum = luminance(hdr);
  const Raster mapped = apply_tmo(id, params, lum);
  if (hdr.channels == 1) return ldr_from_raster(mapped);
  return correct_color(hdr, mapped, saturation);
}

}  // namespace tonematch
