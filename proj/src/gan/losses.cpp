#include <cstddef>

#include "tonematch/common.hpp"
#include "tonematch/gan.hpp"

namespace tonematch::gan {

Tensor lsgan_loss(const Tensor& logits, bool target_real) {
  return nn::mse_to(logits, target_real ? 1.0 : 0.0);
}

Tensor fm_loss(const std::vector<DiscriminatorOutput>& real,
               const std::vector<DiscriminatorOutput>& fake) {
  if (real.size() != fake.size())
    throw DataError("feature matching: discriminator scale count mismatch");
  Tensor total;
  for (std::size_t s = 0; s < real.size(); ++s) {
    if (real[s].taps.size() != fake[s].taps.size())
      throw DataError("feature matching: tap count mismatch at scale " +
                      std::to_string(s));
    for (std::size_t i = 0; i < real[s].taps.size(); ++i) {
      // Real-side features are targets, not a gradient path into D.
      Tensor term = nn::l1_diff(fake[s].taps[i], real[s].taps[i].detach());
      total = total.defined() ? nn::add(total, term) : term;
    }
  }
  if (!total.defined()) throw DataError("feature matching: no feature taps");
  return total;
}

Tensor perceptual_loss(const Tensor& y, const Tensor& g_x, PerceptualNet& net) {
  if (y.shape() != g_x.shape())
    throw DataError("perceptual loss: image shapes differ (" + y.shape().str() +
                    " vs " + g_x.shape().str() + ")");
  const std::vector<Tensor> ty = net.features(y);
  const std::vector<Tensor> tg = net.features(g_x);
  Tensor total;
  for (std::size_t i = 0; i < ty.size(); ++i) {
    Tensor term = nn::l1_diff(tg[i], ty[i]);
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total;
}

}  // namespace tonematch::gan
