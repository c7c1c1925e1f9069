#include "salt/report.hpp"

namespace salt {

nlohmann::json to_json(const CoverageReport& r) {
  return {{"coverage", r.coverage}, {"shared", r.shared}, {"nonshared", r.nonshared}, {"collisions", r.collisions}};
}

nlohmann::json to_json(const TransferReport& r) {
  return {{"method", method_name(r.method)},
          {"copied", r.copied},
          {"solved", r.solved},
          {"fallback", r.fallback},
          {"residual_mean", r.residual_mean},
          {"residual_max", r.residual_max},
          {"coverage", r.coverage},
          {"shared", r.shared},
          {"nonshared", r.nonshared},
          {"collisions", r.collisions},
          {"candidates", r.candidates},
          {"no_aux", r.no_aux},
          {"mean_pairs", r.mean_pairs}};
}

}  // namespace salt
