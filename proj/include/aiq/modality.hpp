#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace aiq {

// Closed universe of knowledge forms a machine can perceive or express.
enum class Modality { text, sound, image, temperature, force, electromagnetic };

inline constexpr std::array<Modality, 6> kAllModalities = {
    Modality::text,  Modality::sound,       Modality::image,
    Modality::temperature, Modality::force, Modality::electromagnetic};

using ModalitySet = std::set<Modality>;

std::string_view to_string(Modality m) noexcept;
std::optional<Modality> parse_modality(std::string_view name) noexcept;
// Throws aiq::Error("invalid_modality") on unknown names.
Modality modality_from_string(std::string_view name);

}  // namespace aiq
