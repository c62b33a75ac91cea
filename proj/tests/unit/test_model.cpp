#include <doctest.h>

#include <algorithm>
#include <thread>

#include "aiq/error.hpp"
#include "aiq/intelligence_model.hpp"

using namespace aiq;
using namespace aiq::model;

namespace {

bool innovated_subset_of_mastered(const StandardIntelligentMachine& m) {
  return std::all_of(m.innovated().begin(), m.innovated().end(),
                     [&](const std::string& id) { return m.mastered().contains(id); });
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("modality names round-trip and reject unknowns") {
    for (Modality m : kAllModalities) CHECK(modality_from_string(to_string(m)) == m);
    CHECK(kAllModalities.size() == 6);
    CHECK_THROWS_AS(modality_from_string("smell"), Error);
  }

  TEST_CASE("world issues distinct ids") {
    World w;
    std::set<std::string> ids;
    for (int i = 0; i < 1000; ++i) ids.insert(w.make_element("x", Modality::text).id);
    CHECK(ids.size() == 1000);
    CHECK(w.issued() == 1000);
  }

  TEST_CASE("world share is a locked union") {
    World w;
    std::vector<KnowledgeElement> elems;
    for (int i = 0; i < 200; ++i) elems.push_back(w.make_element("e", Modality::text));
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&] {
        for (const auto& e : elems) w.share(e);
      });
    }
    for (auto& t : threads) t.join();
    CHECK(w.shared_size() == 200);
  }

  TEST_CASE("input adds admissible elements once and refuses others") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    const auto e = w.make_element("fact", Modality::text);
    CHECK(m.input_knowledge(e) == 1);
    CHECK(m.mastered().size() == 1);
    CHECK(m.input_knowledge(e) == 1);
    CHECK(m.mastered().size() == 1);

    const auto s = w.make_element("beep", Modality::sound);
    CHECK(m.input_knowledge(s) == 0);
    CHECK(m.mastered().size() == 1);
    REQUIRE(m.trace().size() == 3);
    CHECK(m.trace()[2].result_mark == 0);
    CHECK(m.trace()[0].delta_km == 1);
    CHECK(m.trace()[1].delta_km == 0);
  }

  TEST_CASE("output publishes through Q_O") {
    World w;
    StandardIntelligentMachine m({Modality::text, Modality::sound}, {Modality::text});
    const auto t = w.make_element("fact", Modality::text);
    const auto s = w.make_element("tone", Modality::sound);
    m.input_knowledge(t);
    m.input_knowledge(s);

    CHECK(m.output_knowledge(t.id, w) == 1);
    CHECK(w.shared_size() == 1);
    CHECK(m.output_knowledge(t.id, w) == 1);
    CHECK(w.shared_size() == 1);
    CHECK(m.output_knowledge(s.id, w) == 0);
    CHECK(w.shared_size() == 1);
    CHECK_THROWS_AS(m.output_knowledge("missing", w), Error);
  }

  TEST_CASE("control directives") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    const auto a = w.make_element("alpha", Modality::text);
    const auto b = w.make_element("beta", Modality::text);
    m.input_knowledge(a);
    m.input_knowledge(b);

    SUBCASE("copy adds a fresh id with the same content") {
      CHECK(m.control_knowledge(Directive::copy, {a.id}, w) == 1);
      CHECK(m.mastered().size() == 3);
      int alphas = 0;
      for (const auto& [id, e] : m.mastered()) alphas += e.content == "alpha";
      CHECK(alphas == 2);
    }
    SUBCASE("delete removes from K_M and K_N") {
      REQUIRE(m.innovate(w, 1) == 1);
      const std::string c = *m.innovated().begin();
      CHECK(m.control_knowledge(Directive::remove, {c}, w) == 1);
      CHECK_FALSE(m.mastered().contains(c));
      CHECK(m.innovated().empty());
      CHECK(innovated_subset_of_mastered(m));
    }
    SUBCASE("transform is deterministic") {
      CHECK(m.control_knowledge(Directive::transform, {a.id}, w) == 1);
      CHECK(m.mastered().at(a.id).content == "T(alpha)");
      CHECK(m.mastered().size() == 2);
    }
    SUBCASE("collate folds two into one") {
      CHECK(m.control_knowledge(Directive::collate, {a.id, b.id}, w) == 1);
      CHECK(m.mastered().size() == 1);
      CHECK(m.mastered().at(a.id).content == "C(alpha|beta)");
    }
    SUBCASE("unknown ids give mark 0 without change") {
      const auto before = m.mastered();
      CHECK(m.control_knowledge(Directive::collate, {a.id, "nope"}, w) == 0);
      CHECK(m.control_knowledge(Directive::copy, {}, w) == 0);
      CHECK(m.mastered() == before);
    }
  }

  TEST_CASE("innovate creates an element outside K_M and K_S") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    const auto a = w.make_element("a", Modality::text);
    const auto b = w.make_element("b", Modality::text);
    m.input_knowledge(a);
    m.input_knowledge(b);
    m.output_knowledge(a.id, w);
    m.output_knowledge(b.id, w);
    const auto shared_before = w.shared();

    CHECK(m.innovate(w, 99) == 1);
    REQUIRE(m.innovated().size() == 1);
    const std::string c = *m.innovated().begin();
    CHECK(c != a.id);
    CHECK(c != b.id);
    CHECK_FALSE(shared_before.contains(c));
    CHECK_FALSE(w.contains(c));
    CHECK(m.mastered().contains(c));
    CHECK(m.mastered().at(c).origin == Origin::innovated);
    CHECK(m.trace().back().delta_km == 1);
    CHECK(m.trace().back().delta_kn == 1);
  }

  TEST_CASE("innovate on an empty machine fails") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    CHECK(m.innovate(w, 5) == 0);
    CHECK(m.mastered().empty());
    CHECK(m.innovated().empty());
    CHECK(m.trace().size() == 1);
  }

  TEST_CASE("innovate is deterministic from a snapshot") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    for (int i = 0; i < 6; ++i) m.input_knowledge(w.make_element("k" + std::to_string(i), Modality::text));
    World w2 = w;
    StandardIntelligentMachine m2 = m;
    m.innovate(w, 1234);
    m2.innovate(w2, 1234);
    CHECK(m.innovated() == m2.innovated());
    CHECK(m.mastered() == m2.mastered());
  }

  TEST_CASE("sync push and pull") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    for (int i = 0; i < 3; ++i) m.input_knowledge(w.make_element("p" + std::to_string(i), Modality::text));
    CHECK(m.sync_shared_knowledge(w, SyncDirection::push) == 3);
    CHECK(w.shared_size() == 3);
    CHECK(m.sync_shared_knowledge(w, SyncDirection::pull) == 0);

    StandardIntelligentMachine other({Modality::text, Modality::sound}, {Modality::text});
    other.input_knowledge(w.make_element("song", Modality::sound));
    CHECK(other.sync_shared_knowledge(w, SyncDirection::push) == 0);
    CHECK(w.shared_size() == 3);
    CHECK(other.sync_shared_knowledge(w, SyncDirection::pull) == 3);
    CHECK(other.mastered().size() == 4);
  }

  TEST_CASE("every operation appends one event with increasing steps") {
    World w;
    StandardIntelligentMachine m({Modality::text}, {Modality::text});
    const auto e = w.make_element("x", Modality::text);
    m.input_knowledge(e);
    m.output_knowledge(e.id, w);
    m.control_knowledge(Directive::copy, {e.id}, w);
    m.innovate(w, 3);
    m.sync_shared_knowledge(w, SyncDirection::pull);
    REQUIRE(m.trace().size() == 5);
    for (std::size_t i = 1; i < m.trace().size(); ++i) CHECK(m.trace()[i].step > m.trace()[i - 1].step);
    CHECK(innovated_subset_of_mastered(m));
  }

  TEST_CASE("machine state and events serialise") {
    MachineState s;
    s.input_modalities = {Modality::text, Modality::image};
    s.mastered = {"k1", "k2"};
    s.innovated = {"k2"};
    CHECK(state_from_json(state_to_json(s)) == s);
    MachineEvent e{4, Operation::innovate, 1, 1, 1};
    CHECK(machine_event_from_json(machine_event_to_json(e)) == e);
  }
}
