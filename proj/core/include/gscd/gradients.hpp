#pragma once

#include <span>
#include <vector>

#include "gscd/camera.hpp"
#include "gscd/image.hpp"
#include "gscd/renderer.hpp"
#include "gscd/scene.hpp"

namespace gscd {

enum class LossKind { l2, l1 };

struct GaussianGradient {
  Vec3 position = Vec3::Zero();
  double opacity = 0.0;
  Rgb color = Rgb::Zero();
};

struct GradientResult {
  double loss = 0.0;                     // summed over masked pixels and channels
  std::vector<GaussianGradient> grads;   // one per scene Gaussian
};

// Photometric loss sum_{p in mask} sum_c rho(C_pc - target_pc) with rho the
// squared or absolute error, evaluated in double precision.
double masked_loss(const GaussianScene& scene, const PinholeCamera& cam, const Rgb& background,
                   const ImageBuffer& target, const ChangeMask& pixel_mask,
                   const RenderOptions& opts = {}, LossKind kind = LossKind::l2);

// Analytic gradients of masked_loss w.r.t. position, opacity and color.
// Entries for Gaussians not flagged in `active` are zero. Throws
// ContractError on dimension mismatch.
GradientResult render_gradients(const GaussianScene& scene, const PinholeCamera& cam,
                                const Rgb& background, const ImageBuffer& target,
                                const ChangeMask& pixel_mask, const std::vector<bool>& active,
                                const RenderOptions& opts = {}, LossKind kind = LossKind::l2);

}  // namespace gscd
