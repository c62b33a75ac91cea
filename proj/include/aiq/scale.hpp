#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/modality.hpp"

namespace aiq {

// Exact non-negative fraction, always kept in lowest terms.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  static Rational percent(std::int64_t p) { return Rational(p, 100); }
  // Accepts "3/100", "7" or "0.03".
  static Rational parse(const std::string& text);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;
  // Decimal rendering for messages; exact for percent-style weights.
  std::string decimal(int places = 2) const;

  Rational operator+(const Rational& o) const;
  Rational& operator+=(const Rational& o) { return *this = *this + o; }

  friend bool operator==(const Rational&, const Rational&) = default;
  std::strong_ordering operator<=>(const Rational& o) const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

enum class Category { acquire, master, innovate, feedback };

std::string_view to_string(Category c) noexcept;
Category category_from_string(std::string_view name);

struct AbilityCategory {
  Category name = Category::acquire;
  Rational weight;
  friend bool operator==(const AbilityCategory&, const AbilityCategory&) = default;
};

struct SubTest {
  std::string id;
  std::string label;
  Category category = Category::acquire;
  Rational weight;
  Modality expected_modality = Modality::text;
  friend bool operator==(const SubTest&, const SubTest&) = default;
};

struct IntelligenceScale {
  std::string scale_id;
  std::vector<SubTest> subtests;
  std::vector<AbilityCategory> categories;

  const SubTest* find(const std::string& subtest_id) const;
  std::vector<double> weights() const;

  friend bool operator==(const IntelligenceScale&, const IntelligenceScale&) = default;
};

inline constexpr const char* kDefaultScaleId = "aiq-2014";

// Four ability categories and fifteen weighted sub-tests of the published
// intelligence scale.
IntelligenceScale default_scale();

// Lists every violated invariant; empty means the scale is usable.
std::vector<std::string> validate_scale(const IntelligenceScale& scale);

nlohmann::json scale_to_json(const IntelligenceScale& scale);
IntelligenceScale scale_from_json(const nlohmann::json& doc);

}  // namespace aiq
