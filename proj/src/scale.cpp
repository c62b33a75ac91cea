#include "aiq/scale.hpp"

#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "aiq/error.hpp"

namespace aiq {

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error("invalid_rational", "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  num_ = g ? num / g : 0;
  den_ = g ? den / g : 1;
}

Rational Rational::parse(const std::string& text) {
  try {
    if (auto slash = text.find('/'); slash != std::string::npos) {
      return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
    }
    if (auto dot = text.find('.'); dot != std::string::npos) {
      const std::string frac = text.substr(dot + 1);
      std::int64_t den = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
      const std::int64_t whole = dot == 0 ? 0 : std::stoll(text.substr(0, dot));
      return Rational(whole * den + (frac.empty() ? 0 : std::stoll(frac)), den);
    }
    return Rational(std::stoll(text));
  } catch (const std::logic_error&) {
    throw Error("invalid_rational", "cannot parse weight '" + text + "'");
  }
}

std::string Rational::str() const {
  return den_ == 1 ? std::to_string(num_) : fmt::format("{}/{}", num_, den_);
}

std::string Rational::decimal(int places) const {
  return fmt::format("{:.{}f}", to_double(), places);
}

Rational Rational::operator+(const Rational& o) const {
  const std::int64_t l = std::lcm(den_, o.den_);
  return Rational(num_ * (l / den_) + o.num_ * (l / o.den_), l);
}

std::strong_ordering Rational::operator<=>(const Rational& o) const {
  return num_ * o.den_ <=> o.num_ * den_;
}

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::acquire: return "acquire";
    case Category::master: return "master";
    case Category::innovate: return "innovate";
    case Category::feedback: return "feedback";
  }
  return "acquire";
}

Category category_from_string(std::string_view name) {
  for (Category c : {Category::acquire, Category::master, Category::innovate, Category::feedback}) {
    if (to_string(c) == name) return c;
  }
  throw Error("invalid_category", "unknown ability category '" + std::string(name) + "'");
}

const SubTest* IntelligenceScale::find(const std::string& subtest_id) const {
  for (const auto& s : subtests) {
    if (s.id == subtest_id) return &s;
  }
  return nullptr;
}

std::vector<double> IntelligenceScale::weights() const {
  std::vector<double> w;
  w.reserve(subtests.size());
  for (const auto& s : subtests) w.push_back(s.weight.to_double());
  return w;
}

IntelligenceScale default_scale() {
  using C = Category;
  using M = Modality;
  auto pct = Rational::percent;
  IntelligenceScale scale;
  scale.scale_id = kDefaultScaleId;
  scale.categories = {
      {C::acquire, pct(10)}, {C::master, pct(15)}, {C::innovate, pct(65)}, {C::feedback, pct(10)}};
  // Labels keep the published wording, including "master" on the innovation rows.
  scale.subtests = {
      {"acquire.words", "Ability to identify words", C::acquire, pct(3), M::text},
      {"acquire.sound", "Ability to identify sound", C::acquire, pct(3), M::sound},
      {"acquire.image", "Ability to identify image", C::acquire, pct(4), M::image},
      {"master.general_knowledge", "Ability to master general knowledge", C::master, pct(6), M::text},
      {"master.translation", "Ability to master translation ability", C::master, pct(3), M::text},
      {"master.calculation", "Ability to master calculation", C::master, pct(6), M::text},
      {"innovate.arrangement", "Ability to master arrangement", C::innovate, pct(5), M::text},
      {"innovate.association", "Ability to master association", C::innovate, pct(12), M::text},
      {"innovate.creation", "Ability to master creation", C::innovate, pct(12), M::text},
      {"innovate.speculation", "Ability to master speculation", C::innovate, pct(12), M::text},
      {"innovate.selection", "Ability to master selection", C::innovate, pct(12), M::text},
      {"innovate.finding_laws", "Ability to master finding (laws)", C::innovate, pct(12), M::text},
      {"feedback.word", "Word feedback ability", C::feedback, pct(3), M::text},
      {"feedback.sound", "Sound feedback ability", C::feedback, pct(3), M::text},
      {"feedback.image", "Image feedback ability", C::feedback, pct(4), M::text},
  };
  return scale;
}

std::vector<std::string> validate_scale(const IntelligenceScale& scale) {
  std::vector<std::string> violations;
  if (scale.subtests.empty()) violations.emplace_back("scale has no sub-tests");

  std::set<std::string> seen;
  std::map<Category, Rational> by_category;
  std::map<Category, int> counts;
  Rational total;
  for (const auto& s : scale.subtests) {
    if (!seen.insert(s.id).second) violations.push_back("duplicate id '" + s.id + "'");
    if (s.weight <= Rational(0)) violations.push_back("sub-test '" + s.id + "' has non-positive weight");
    if (s.weight > Rational(1)) violations.push_back("sub-test '" + s.id + "' has weight above 1");
    total += s.weight;
    by_category[s.category] += s.weight;
    counts[s.category] += 1;
  }
  if (total != Rational(1)) {
    violations.push_back("weights sum to " + total.decimal() + " (" + total.str() + ")");
  }

  std::set<Category> declared;
  Rational category_total;
  for (const auto& c : scale.categories) {
    if (!declared.insert(c.name).second) {
      violations.push_back("duplicate category '" + std::string(to_string(c.name)) + "'");
    }
    category_total += c.weight;
    const std::string name(to_string(c.name));
    if (counts[c.name] == 0) {
      violations.push_back("category '" + name + "' is empty");
      continue;
    }
    if (by_category[c.name] != c.weight) {
      violations.push_back("category '" + name + "' weight " + c.weight.decimal() +
                           " differs from its sub-test sum " + by_category[c.name].decimal());
    }
  }
  if (!scale.categories.empty() && category_total != Rational(1)) {
    violations.push_back("category weights sum to " + category_total.decimal());
  }
  for (const auto& s : scale.subtests) {
    if (!declared.contains(s.category)) {
      violations.push_back("sub-test '" + s.id + "' belongs to undeclared category '" +
                           std::string(to_string(s.category)) + "'");
    }
  }
  return violations;
}

nlohmann::json scale_to_json(const IntelligenceScale& scale) {
  nlohmann::json doc;
  doc["scale_id"] = scale.scale_id;
  doc["categories"] = nlohmann::json::array();
  for (const auto& c : scale.categories) {
    doc["categories"].push_back({{"name", to_string(c.name)}, {"weight", c.weight.str()}});
  }
  doc["subtests"] = nlohmann::json::array();
  for (const auto& s : scale.subtests) {
    doc["subtests"].push_back({{"id", s.id},
                               {"label", s.label},
                               {"category", to_string(s.category)},
                               {"weight", s.weight.str()},
                               {"expected_modality", to_string(s.expected_modality)}});
  }
  return doc;
}

IntelligenceScale scale_from_json(const nlohmann::json& doc) {
  try {
    IntelligenceScale scale;
    scale.scale_id = doc.at("scale_id").get<std::string>();
    for (const auto& c : doc.at("categories")) {
      scale.categories.push_back({category_from_string(c.at("name").get<std::string>()),
                                  Rational::parse(c.at("weight").get<std::string>())});
    }
    for (const auto& s : doc.at("subtests")) {
      scale.subtests.push_back({s.at("id").get<std::string>(), s.value("label", ""),
                                category_from_string(s.at("category").get<std::string>()),
                                Rational::parse(s.at("weight").get<std::string>()),
                                modality_from_string(s.value("expected_modality", "text"))});
    }
    return scale;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_scale", std::string("malformed scale document: ") + e.what());
  }
}

}  // namespace aiq
