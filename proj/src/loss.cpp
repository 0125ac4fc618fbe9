#include "comir/loss.hpp"

namespace comir {

CriticKind parse_critic(const std::string& name) {
  if (name == "mse") return CriticKind::mse;
  if (name == "cosine") return CriticKind::cosine;
  if (name == "bilinear") return CriticKind::bilinear;
  throw LossError("unknown critic '" + name + "' (expected mse, cosine or bilinear)");
}

std::string to_string(CriticKind kind) {
  switch (kind) {
    case CriticKind::mse: return "mse";
    case CriticKind::cosine: return "cosine";
    case CriticKind::bilinear: return "bilinear";
  }
  return "mse";
}

Group parse_group(const std::string& name) {
  if (name == "trivial" || name == "none") return Group::trivial;
  if (name == "c4" || name == "C4") return Group::c4;
  throw LossError("unknown group '" + name + "' (expected trivial or c4)");
}

std::string to_string(Group group) { return group == Group::c4 ? "c4" : "trivial"; }

void CriticSpec::validate(int channels) const {
  if (kind != CriticKind::bilinear) return;
  if (bilinear_weights.rows() != channels || bilinear_weights.cols() != channels) {
    throw LossError("bilinear critic weights must be " + std::to_string(channels) + "x" + std::to_string(channels) +
                    ", got " + std::to_string(bilinear_weights.rows()) + "x" +
                    std::to_string(bilinear_weights.cols()));
  }
  if (!bilinear_weights.allFinite()) throw LossError("bilinear critic weights are not finite");
}

std::vector<C4Element> draw_group_elements(Group group, int modalities, int tuples, const C4Draw& draw) {
  std::vector<C4Element> out(std::size_t(modalities) * tuples);
  if (group == Group::trivial) return out;
  for (auto& g : out) g = draw();
  return out;
}

}  // namespace comir
