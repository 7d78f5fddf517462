#include "advlab/attack.hpp"

#include <cmath>
#include <sstream>

namespace advlab::attack {

std::vector<int> apgd_checkpoints(int iters) {
  if (iters < 1) throw TensorError("apgd_checkpoints: iters must be >= 1");
  // fractions are multiples of 0.01, so track hundredths in integers to keep
  // ceil() away from floating-point dust
  std::vector<long> p = {0, 22};
  while (p.back() < 100) {
    std::size_t j = p.size() - 1;
    p.push_back(p[j] + std::max(p[j] - p[j - 1] - 3, 6L));
  }
  std::vector<int> w;
  for (std::size_t j = 1; j < p.size(); ++j) {
    int v = static_cast<int>((p[j] * iters + 99) / 100);  // ceil(p_j * iters)
    v = std::min(v, iters);
    if (v >= 1 && (w.empty() || v > w.back())) w.push_back(v);
  }
  return w;
}

std::string eval_csv_header() {
  return "threat,epsilon,clean_acc,robust_acc,iters,stages,seed";
}

std::string eval_csv_row(const EvalReport& rep) {
  std::ostringstream os;
  os.precision(10);
  os << threat::norm_name(rep.tm.p) << "," << rep.tm.epsilon << ","
     << rep.clean_acc << "," << rep.robust_acc << "," << rep.iters << ","
     << rep.stages << "," << rep.seed;
  return os.str();
}

}  // namespace advlab::attack
