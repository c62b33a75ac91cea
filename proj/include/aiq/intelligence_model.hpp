#pragma once

// Executable model of a standard intelligent machine: the shared world, the
// machine's mastered and innovated knowledge sets, its input/output modality
// sets, and the four knowledge functions (input, output, control, innovate)
// plus shared-base synchronisation. Every operation appends one MachineEvent
// so a life cycle can be classified afterwards.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/modality.hpp"

namespace aiq::model {

enum class Origin { world, shared, imported, innovated };

std::string_view to_string(Origin o) noexcept;
Origin origin_from_string(std::string_view name);

struct KnowledgeElement {
  std::string id;
  std::string content;
  Modality modality = Modality::text;
  Origin origin = Origin::world;
  // Normalised prompt this element answers, when the element is a keyed fact.
  // Empty for free-standing knowledge.
  std::string key;

  friend bool operator==(const KnowledgeElement&, const KnowledgeElement&) = default;
};

using KnowledgeSet = std::map<std::string, KnowledgeElement>;

// The shared knowledge base K_S together with a fresh-id source standing in
// for the unbounded universe K. Sync operations from several machines may run
// concurrently, so mutation of the shared set goes through a lock.
class World {
 public:
  World() = default;
  World(const World& other);
  World& operator=(const World& other);

  // Issues an element from K with an id never handed out before.
  KnowledgeElement make_element(std::string content, Modality modality,
                                Origin origin = Origin::world, std::string key = {});
  std::string fresh_id();

  // Returns true if the element was not yet present.
  bool share(const KnowledgeElement& element);
  bool contains(const std::string& id) const;
  KnowledgeSet shared() const;
  std::size_t shared_size() const;
  std::uint64_t issued() const;

  // Restores a world from a snapshot (shared set + id counter).
  static World restore(KnowledgeSet shared, std::uint64_t issued);

 private:
  mutable std::mutex mutex_;
  KnowledgeSet shared_;
  std::uint64_t next_id_ = 0;
};

enum class Operation { input, output, control, innovate, sync };

std::string_view to_string(Operation op) noexcept;
Operation operation_from_string(std::string_view name);

struct MachineEvent {
  std::uint64_t step = 0;
  Operation op = Operation::input;
  int result_mark = 0;
  std::int64_t delta_km = 0;
  std::int64_t delta_kn = 0;

  friend bool operator==(const MachineEvent&, const MachineEvent&) = default;
};

enum class Directive { copy, remove, transform, collate };

std::string_view to_string(Directive d) noexcept;

enum class SyncDirection { push, pull };

// Observable state of a machine at one instant; what the classifier sees.
struct MachineState {
  ModalitySet input_modalities;
  ModalitySet output_modalities;
  std::set<std::string> mastered;   // ids in K_M
  std::set<std::string> innovated;  // ids in K_N

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

class StandardIntelligentMachine {
 public:
  StandardIntelligentMachine() = default;
  StandardIntelligentMachine(ModalitySet input_modalities, ModalitySet output_modalities);

  // I: absorbs an element when its modality is identifiable on input.
  int input_knowledge(const KnowledgeElement& element);
  // O: publishes a mastered element into the world when expressible.
  // Throws aiq::Error("unknown_element") if the id is not in K_M.
  int output_knowledge(const std::string& element_id, World& target);
  // C: copy / delete / transform / collate over K_M. Collate takes exactly two
  // ids and folds the second into the first.
  int control_knowledge(Directive directive, const std::vector<std::string>& element_ids,
                        World& world);
  // N: derives one fresh element from two seeded picks of K_M.
  int innovate(World& world, std::uint64_t seed);
  // Returns the number of elements newly transferred.
  std::size_t sync_shared_knowledge(World& world, SyncDirection direction);

  // Lookup by normalised key; used by the simulated-machine subject.
  std::optional<KnowledgeElement> find_by_key(std::string_view key) const;

  const KnowledgeSet& mastered() const noexcept { return mastered_; }
  const std::set<std::string>& innovated() const noexcept { return innovated_; }
  const ModalitySet& input_modalities() const noexcept { return input_modalities_; }
  const ModalitySet& output_modalities() const noexcept { return output_modalities_; }
  const std::vector<MachineEvent>& trace() const noexcept { return trace_; }
  MachineState state() const;

  // Seeds K_M without recording an event (pre-stored knowledge base).
  void preload(const KnowledgeElement& element);

 private:
  int record(Operation op, int mark, std::size_t km_before, std::size_t kn_before);

  ModalitySet input_modalities_;
  ModalitySet output_modalities_;
  KnowledgeSet mastered_;
  std::set<std::string> innovated_;
  std::vector<MachineEvent> trace_;
};

enum class SystemType { type0, type1, type2, type3, type9 };

std::string_view to_string(SystemType t) noexcept;
SystemType system_type_from_string(std::string_view name);

// Classifies a recorded life cycle. An empty trace is classified from the
// final state alone.
SystemType classify_machine(const std::vector<MachineEvent>& trace, const MachineState& initial,
                            const MachineState& final_state);

nlohmann::json state_to_json(const MachineState& s);
MachineState state_from_json(const nlohmann::json& j);
nlohmann::json machine_event_to_json(const MachineEvent& e);
MachineEvent machine_event_from_json(const nlohmann::json& j);

}  // namespace aiq::model
