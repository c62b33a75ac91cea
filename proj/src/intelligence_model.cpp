#include "aiq/intelligence_model.hpp"

#include <random>

#include "aiq/error.hpp"

namespace aiq::model {

std::string_view to_string(Origin o) noexcept {
  switch (o) {
    case Origin::world: return "world";
    case Origin::shared: return "shared";
    case Origin::imported: return "imported";
    case Origin::innovated: return "innovated";
  }
  return "world";
}

Origin origin_from_string(std::string_view name) {
  for (Origin o : {Origin::world, Origin::shared, Origin::imported, Origin::innovated}) {
    if (to_string(o) == name) return o;
  }
  throw Error("invalid_origin", "unknown knowledge origin '" + std::string(name) + "'");
}

std::string_view to_string(Operation op) noexcept {
  switch (op) {
    case Operation::input: return "input";
    case Operation::output: return "output";
    case Operation::control: return "control";
    case Operation::innovate: return "innovate";
    case Operation::sync: return "sync";
  }
  return "input";
}

Operation operation_from_string(std::string_view name) {
  for (Operation op : {Operation::input, Operation::output, Operation::control,
                       Operation::innovate, Operation::sync}) {
    if (to_string(op) == name) return op;
  }
  throw Error("invalid_operation", "unknown machine operation '" + std::string(name) + "'");
}

std::string_view to_string(Directive d) noexcept {
  switch (d) {
    case Directive::copy: return "copy";
    case Directive::remove: return "delete";
    case Directive::transform: return "transform";
    case Directive::collate: return "collate";
  }
  return "copy";
}

std::string_view to_string(SystemType t) noexcept {
  switch (t) {
    case SystemType::type0: return "Type0";
    case SystemType::type1: return "Type1";
    case SystemType::type2: return "Type2";
    case SystemType::type3: return "Type3";
    case SystemType::type9: return "Type9";
  }
  return "Type9";
}

SystemType system_type_from_string(std::string_view name) {
  for (SystemType t : {SystemType::type0, SystemType::type1, SystemType::type2,
                       SystemType::type3, SystemType::type9}) {
    if (to_string(t) == name) return t;
  }
  throw Error("invalid_system_type", "unknown system type '" + std::string(name) + "'");
}

// --- World -----------------------------------------------------------------

World::World(const World& other) {
  std::lock_guard lock(other.mutex_);
  shared_ = other.shared_;
  next_id_ = other.next_id_;
}

World& World::operator=(const World& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  shared_ = other.shared_;
  next_id_ = other.next_id_;
  return *this;
}

World World::restore(KnowledgeSet shared, std::uint64_t issued) {
  World w;
  w.shared_ = std::move(shared);
  w.next_id_ = issued;
  return w;
}

std::string World::fresh_id() {
  std::lock_guard lock(mutex_);
  return "k" + std::to_string(next_id_++);
}

KnowledgeElement World::make_element(std::string content, Modality modality, Origin origin,
                                     std::string key) {
  return KnowledgeElement{fresh_id(), std::move(content), modality, origin, std::move(key)};
}

bool World::share(const KnowledgeElement& element) {
  std::lock_guard lock(mutex_);
  return shared_.emplace(element.id, element).second;
}

bool World::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return shared_.contains(id);
}

KnowledgeSet World::shared() const {
  std::lock_guard lock(mutex_);
  return shared_;
}

std::size_t World::shared_size() const {
  std::lock_guard lock(mutex_);
  return shared_.size();
}

std::uint64_t World::issued() const {
  std::lock_guard lock(mutex_);
  return next_id_;
}

// --- StandardIntelligentMachine ---------------------------------------------

StandardIntelligentMachine::StandardIntelligentMachine(ModalitySet input_modalities,
                                                       ModalitySet output_modalities)
    : input_modalities_(std::move(input_modalities)),
      output_modalities_(std::move(output_modalities)) {}

int StandardIntelligentMachine::record(Operation op, int mark, std::size_t km_before,
                                       std::size_t kn_before) {
  MachineEvent ev;
  ev.step = trace_.empty() ? 1 : trace_.back().step + 1;
  ev.op = op;
  ev.result_mark = mark;
  ev.delta_km = static_cast<std::int64_t>(mastered_.size()) - static_cast<std::int64_t>(km_before);
  ev.delta_kn = static_cast<std::int64_t>(innovated_.size()) - static_cast<std::int64_t>(kn_before);
  trace_.push_back(ev);
  return mark;
}

void StandardIntelligentMachine::preload(const KnowledgeElement& element) {
  mastered_.emplace(element.id, element);
}

int StandardIntelligentMachine::input_knowledge(const KnowledgeElement& element) {
  const auto km = mastered_.size(), kn = innovated_.size();
  if (!input_modalities_.contains(element.modality)) {
    return record(Operation::input, 0, km, kn);
  }
  mastered_.emplace(element.id, element);
  return record(Operation::input, 1, km, kn);
}

int StandardIntelligentMachine::output_knowledge(const std::string& element_id, World& target) {
  auto it = mastered_.find(element_id);
  if (it == mastered_.end()) {
    throw Error("unknown_element", "element '" + element_id + "' is not in K_M");
  }
  const auto km = mastered_.size(), kn = innovated_.size();
  if (!output_modalities_.contains(it->second.modality)) {
    return record(Operation::output, 0, km, kn);
  }
  target.share(it->second);
  return record(Operation::output, 1, km, kn);
}

int StandardIntelligentMachine::control_knowledge(Directive directive,
                                                  const std::vector<std::string>& element_ids,
                                                  World& world) {
  const auto km = mastered_.size(), kn = innovated_.size();
  bool all_known = !element_ids.empty();
  for (const auto& id : element_ids) {
    if (!mastered_.contains(id)) all_known = false;
  }
  if (!all_known) return record(Operation::control, 0, km, kn);

  switch (directive) {
    case Directive::copy:
      for (const auto& id : element_ids) {
        KnowledgeElement dup = mastered_.at(id);
        dup.id = world.fresh_id();
        if (dup.origin == Origin::innovated) dup.origin = Origin::imported;
        mastered_.emplace(dup.id, std::move(dup));
      }
      break;
    case Directive::remove:
      for (const auto& id : element_ids) {
        mastered_.erase(id);
        innovated_.erase(id);
      }
      break;
    case Directive::transform:
      for (const auto& id : element_ids) {
        auto& e = mastered_.at(id);
        e.content = "T(" + e.content + ")";
      }
      break;
    case Directive::collate: {
      if (element_ids.size() != 2 || element_ids[0] == element_ids[1]) {
        return record(Operation::control, 0, km, kn);
      }
      auto& keep = mastered_.at(element_ids[0]);
      keep.content = "C(" + keep.content + "|" + mastered_.at(element_ids[1]).content + ")";
      mastered_.erase(element_ids[1]);
      innovated_.erase(element_ids[1]);
      break;
    }
  }
  return record(Operation::control, 1, km, kn);
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

int StandardIntelligentMachine::innovate(World& world, std::uint64_t seed) {
  const auto km = mastered_.size(), kn = innovated_.size();
  if (mastered_.empty()) return record(Operation::innovate, 0, km, kn);

  std::uint64_t state_hash = fnv1a(std::to_string(trace_.size()));
  for (const auto& [id, e] : mastered_) state_hash = fnv1a(id, state_hash);
  std::mt19937_64 rng(seed ^ state_hash);
  auto pick = [&]() -> const KnowledgeElement& {
    auto it = mastered_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng() % mastered_.size()));
    return it->second;
  };
  const KnowledgeElement& a = pick();
  const KnowledgeElement& b = pick();

  // Ids from the world generator are never reissued, so the result is outside
  // both K_M and K_S.
  KnowledgeElement fresh = world.make_element("N(" + a.content + "|" + b.content + ")",
                                              a.modality, Origin::innovated);
  innovated_.insert(fresh.id);
  mastered_.emplace(fresh.id, std::move(fresh));
  return record(Operation::innovate, 1, km, kn);
}

std::size_t StandardIntelligentMachine::sync_shared_knowledge(World& world,
                                                              SyncDirection direction) {
  const auto km = mastered_.size(), kn = innovated_.size();
  std::size_t moved = 0;
  if (direction == SyncDirection::push) {
    for (const auto& [id, e] : mastered_) {
      if (output_modalities_.contains(e.modality) && world.share(e)) ++moved;
    }
  } else {
    for (const auto& [id, e] : world.shared()) {
      if (input_modalities_.contains(e.modality) && mastered_.emplace(id, e).second) ++moved;
    }
  }
  record(Operation::sync, 1, km, kn);
  return moved;
}

std::optional<KnowledgeElement> StandardIntelligentMachine::find_by_key(
    std::string_view key) const {
  for (const auto& [id, e] : mastered_) {
    if (!e.key.empty() && e.key == key) return e;
  }
  return std::nullopt;
}

MachineState StandardIntelligentMachine::state() const {
  MachineState s;
  s.input_modalities = input_modalities_;
  s.output_modalities = output_modalities_;
  for (const auto& [id, e] : mastered_) s.mastered.insert(id);
  s.innovated = innovated_;
  return s;
}

// --- classification ----------------------------------------------------------

SystemType classify_machine(const std::vector<MachineEvent>& trace, const MachineState& initial,
                            const MachineState& final_state) {
  const MachineState& start = trace.empty() ? final_state : initial;

  if (final_state.input_modalities.empty() && final_state.output_modalities.empty()) {
    return SystemType::type0;
  }
  if (final_state.mastered.empty()) return SystemType::type9;

  bool km_changed = start.mastered != final_state.mastered;
  bool kn_ever_nonempty = !start.innovated.empty() || !final_state.innovated.empty();
  auto kn_size = static_cast<std::int64_t>(start.innovated.size());
  for (const auto& ev : trace) {
    if (ev.delta_km != 0) km_changed = true;
    kn_size += ev.delta_kn;
    if (kn_size > 0) kn_ever_nonempty = true;
  }

  if (!final_state.innovated.empty()) return SystemType::type3;
  if (kn_ever_nonempty) return SystemType::type9;
  if (!km_changed) return SystemType::type1;
  if (final_state.mastered.size() > start.mastered.size()) return SystemType::type2;
  return SystemType::type9;
}

namespace {

nlohmann::json modalities_json(const ModalitySet& set) {
  auto out = nlohmann::json::array();
  for (Modality m : set) out.push_back(to_string(m));
  return out;
}

ModalitySet modalities_from(const nlohmann::json& j) {
  ModalitySet out;
  for (const auto& m : j) out.insert(modality_from_string(m.get<std::string>()));
  return out;
}

}  // namespace

nlohmann::json state_to_json(const MachineState& s) {
  return {{"input_modalities", modalities_json(s.input_modalities)},
          {"output_modalities", modalities_json(s.output_modalities)},
          {"mastered", s.mastered},
          {"innovated", s.innovated}};
}

MachineState state_from_json(const nlohmann::json& j) {
  MachineState s;
  s.input_modalities = modalities_from(j.value("input_modalities", nlohmann::json::array()));
  s.output_modalities = modalities_from(j.value("output_modalities", nlohmann::json::array()));
  s.mastered = j.value("mastered", std::set<std::string>{});
  s.innovated = j.value("innovated", std::set<std::string>{});
  return s;
}

nlohmann::json machine_event_to_json(const MachineEvent& e) {
  return {{"step", e.step}, {"op", to_string(e.op)}, {"result", e.result_mark},
          {"delta_km", e.delta_km}, {"delta_kn", e.delta_kn}};
}

MachineEvent machine_event_from_json(const nlohmann::json& j) {
  MachineEvent e;
  e.step = j.at("step").get<std::uint64_t>();
  e.op = operation_from_string(j.at("op").get<std::string>());
  e.result_mark = j.value("result", 1);
  e.delta_km = j.value("delta_km", std::int64_t{0});
  e.delta_kn = j.value("delta_kn", std::int64_t{0});
  return e;
}

}  // namespace aiq::model
