#include "aiq/modality.hpp"

#include "aiq/error.hpp"

namespace aiq {

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::text: return "text";
    case Modality::sound: return "sound";
    case Modality::image: return "image";
    case Modality::temperature: return "temperature";
    case Modality::force: return "force";
    case Modality::electromagnetic: return "electromagnetic";
  }
  return "text";
}

std::optional<Modality> parse_modality(std::string_view name) noexcept {
  for (Modality m : kAllModalities) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

Modality modality_from_string(std::string_view name) {
  if (auto m = parse_modality(name)) return *m;
  throw Error("invalid_modality", "unknown modality '" + std::string(name) + "'");
}

}  // namespace aiq
