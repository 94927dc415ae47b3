// Stopped-walk truncation of h = 0.3 e^{i theta} + 0.2 e^{2 i theta} at a
// few starting points z.  Prints the hit fraction, the slack of the
// truncation inequality over a sweep of b, and the first few node values
// of h and of the estimate g.
//
//   demo_truncation [n_paths] [seed]

#include <cstdio>
#include <cstdlib>

#include "hmlab/truncation.hpp"

using namespace hmlab;

int main(int argc, char** argv) {
  TruncationConfig cfg;
  cfg.C0 = 4;
  cfg.n_paths = argc > 1 ? std::atoi(argv[1]) : 4000;
  cfg.seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
  cfg.dt = 1e-3;

  const TorusGrid g(32);
  const TorusFunction h = TorusFunction::sample(g, [](double t) {
    return 0.3 * std::polar(1.0, t) + 0.2 * std::polar(1.0, 2 * t);
  });

  for (cplx z : {cplx(0.2, 0), cplx(0.08, 0.05), cplx(0.03, 0)}) {
    const TruncationResult r = truncate(h, z, cfg);
    std::printf("z = %.3f%+.3fi  level %.3f  %s  hit %.3f +- %.3f\n", z.real(), z.imag(), r.level,
                r.fast_path ? "fast path" : "simulated", r.hit_fraction, r.hit_se);
    double worst = 1e300;
    for (double b : {-0.5, -0.2, 0.0, 0.2, 0.5}) {
      const SlackReport s = verify_truncation(h, z, b, r);
      worst = std::min(worst, s.se > 0 ? s.slack / s.se : s.slack);
    }
    std::printf("  min slack over b (in SE units where simulated): %.2f\n", worst);
    for (int j = 0; j < 4; ++j)
      std::printf("  theta_%d  h = %+.3f%+.3fi  g = %+.3f%+.3fi\n", j, h[j].real(), h[j].imag(), r.g_hat[j].real(),
                  r.g_hat[j].imag());
  }
}
