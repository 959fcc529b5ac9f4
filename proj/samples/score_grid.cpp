// Distorts one synthetic head across the full grid and prints the classic
// full-reference scores of each stimulus, in memory and without a pipeline run.
//
//   score_grid [seed]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "dhqa/distortion/grid.hpp"
#include "dhqa/metrics/image_metrics.hpp"
#include "dhqa/metrics/point_cloud.hpp"
#include "dhqa/render.hpp"
#include "dhqa/synthetic.hpp"

int main(int argc, char** argv) {
  using namespace dhqa;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;
  const SyntheticHeadConfig small{24, 40, 256, 0.8};
  const auto head = make_synthetic_head(seed, small);
  const render::Camera cam{render::View::Front, 180, 320};
  const auto ref_cloud = metrics::sample_point_cloud(head, 20000, seed);

  std::printf("%-8s %8s %7s %7s %12s\n", "stimulus", "psnr", "ssim", "gmsd", "p2point");
  for (const auto& spec : distortion::grid_specs(seed, "head")) {
    const auto mesh = distortion::apply(head, spec);
    const auto [ref, dist] = render::render_pair(head, mesh, cam);
    const auto cloud = metrics::sample_point_cloud(mesh, 20000, seed + 1);
    std::printf("%-8s %8.3f %7.4f %7.4f %12.4e\n", spec.tag().c_str(), metrics::psnr(ref.image, dist.image),
                metrics::ssim(ref.image, dist.image), metrics::gmsd(ref.image, dist.image),
                metrics::p2point_mse(ref_cloud, cloud));
  }
}
