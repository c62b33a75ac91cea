#include "aiq/cli.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "aiq/error.hpp"
#include "aiq/harness.hpp"
#include "aiq/intelligence_model.hpp"
#include "aiq/service.hpp"

namespace aiq {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::string data_dir;
  std::string bank;
  std::string registry;
  std::int64_t timeout_ms = 0;
};

HarnessConfig make_config(const Options& o) {
  json doc = json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw Error("invalid_config", "cannot open config " + o.config);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("invalid_config", e.what());
    }
  }
  if (!o.data_dir.empty()) doc["data_dir"] = o.data_dir;
  if (!o.bank.empty()) doc["bank"] = o.bank;
  if (!o.registry.empty()) doc["registry"] = o.registry;
  if (o.timeout_ms > 0) doc["timeout_ms"] = o.timeout_ms;
  return HarnessConfig::from_json(doc);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("io_error", "cannot write " + path);
}

std::string modalities_text(const ModalitySet& set) {
  std::string out;
  for (Modality m : set) out += (out.empty() ? "" : ",") + std::string(to_string(m));
  return out.empty() ? "-" : out;
}

// Relays proctored questions over the terminal. "!cannot" marks a question the
// proctor cannot put to the subject; end of input closes the channel.
void console_proctor(ProctorChannel& channel, const std::atomic<bool>& done, std::istream& in,
                     std::ostream& out) {
  std::uint64_t last = 0;
  while (!done) {
    auto q = channel.wait_for_question(std::chrono::milliseconds(100));
    if (!q || q->sequence == last) continue;
    last = q->sequence;
    out << fmt::format("[{}] ({}) {}\n", q->question_id, to_string(q->modality), q->prompt);
    for (const auto& a : q->attachments) out << "  attachment: " << a << '\n';
    out << "> " << std::flush;
    std::string line;
    if (!std::getline(in, line)) {
      channel.close();
      return;
    }
    if (line == "!cannot") {
      channel.cannot_ask(q->question_id);
    } else {
      channel.submit_answer(q->question_id, line);
    }
  }
}

std::string golden_table(const stats::CohortResult& r, const std::map<std::string, double>& published) {
  std::string out = fmt::format("{:>4}  {:<28} {:<26} {:>8} {:>9} {:>9} {:>7}\n", "rank", "label", "region",
                                "abs IQ", "dev IQ", "published", "delta");
  for (const auto& row : r.rows) {
    const double p = published.at(row.subject_id);
    out += fmt::format("{:>4}  {:<28} {:<26} {:>8.2f} {:>9.2f} {:>9.2f} {:>+7.2f}\n", row.rank, row.label,
                       row.region, row.absolute_iq, row.deviation_iq, p, row.deviation_iq - p);
  }
  out += fmt::format("subjects={} mean={:.4f} S={:.4f}\n", r.count, r.mean, r.std_dev);
  return out;
}

std::string golden_csv(const stats::CohortResult& r, const std::map<std::string, double>& published) {
  std::string out = "rank,subject_id,label,region,absolute_iq,deviation_iq,published_deviation_iq\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},\"{}\",\"{}\",{:.2f},{:.2f},{:.2f}\n", row.rank, row.subject_id, row.label,
                       row.region, row.absolute_iq, row.deviation_iq, published.at(row.subject_id));
  }
  return out;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw Error("invalid_config", "listen must be host:port");
  try {
    return {listen.substr(0, colon), std::stoi(listen.substr(colon + 1))};
  } catch (const std::logic_error&) {
    throw Error("invalid_config", "bad port in '" + listen + "'");
  }
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Absolute and relative IQ testing for people and machines", "aiq"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "harness config (JSON)");
  app.add_option("--data-dir", opt.data_dir, "data directory (default $AIQ_DATA_DIR or ./aiq-data)");
  app.add_option("--bank", opt.bank, "question bank file");
  app.add_option("--registry", opt.registry, "subject registry file");
  app.add_option("--timeout-ms", opt.timeout_ms, "per-question time limit");

  // bank
  auto* bank_cmd = app.add_subcommand("bank", "question bank tools")->require_subcommand(1);
  auto* bank_validate = bank_cmd->add_subcommand("validate", "check a bank against the scale");
  std::string bank_path;
  bank_validate->add_option("path", bank_path)->required();

  // paper
  auto* paper_cmd = app.add_subcommand("paper", "test papers")->require_subcommand(1);
  auto* paper_sample = paper_cmd->add_subcommand("sample", "draw a paper from the bank");
  std::uint64_t seed = 0;
  std::string paper_out;
  paper_sample->add_option("--seed", seed)->required();
  paper_sample->add_option("--out", paper_out, "write here instead of the data directory");

  // subject
  auto* subject_cmd = app.add_subcommand("subject", "test subjects")->require_subcommand(1);
  auto* subject_list = subject_cmd->add_subcommand("list", "registered subjects");

  // session
  auto* session_cmd = app.add_subcommand("session", "test sessions")->require_subcommand(1);
  auto* session_run = session_cmd->add_subcommand("run", "administer a paper to one subject");
  RunRequest run;
  std::string run_paper;
  std::optional<std::uint64_t> run_seed;
  session_run->add_option("--subject", run.subject_id)->required();
  auto* paper_opt = session_run->add_option("--paper", run_paper, "paper id or file");
  session_run->add_option("--seed", run_seed, "sample a paper with this seed")->excludes(paper_opt);
  session_run->add_option("--cohort", run.cohort);
  session_run->add_option("--session-id", run.session_id);

  auto* session_grade = session_cmd->add_subcommand("grade", "record a verdict on a manual question");
  std::string grade_session, grade_question, grade_verdict, grader = "cli";
  bool allow_regrade = false;
  session_grade->add_option("session", grade_session)->required();
  session_grade->add_option("question", grade_question)->required();
  session_grade->add_option("verdict", grade_verdict)->required()->check(CLI::IsMember({"correct", "incorrect"}));
  session_grade->add_option("--grader", grader);
  session_grade->add_flag("--allow-regrade", allow_regrade);

  auto* session_show = session_cmd->add_subcommand("show", "one session with its records");
  std::string show_session;
  session_show->add_option("session", show_session)->required();
  auto* session_list = session_cmd->add_subcommand("list", "all stored sessions");

  // report
  auto* report_cmd = app.add_subcommand("report", "results")->require_subcommand(1);
  auto* report_lb = report_cmd->add_subcommand("leaderboard", "rank a cohort");
  std::string lb_cohort, lb_golden, lb_format = "table";
  bool complete_only = false;
  auto* cohort_opt = report_lb->add_option("--cohort", lb_cohort);
  auto* golden_opt = report_lb->add_option("--golden", lb_golden, "recompute a published leaderboard CSV");
  cohort_opt->excludes(golden_opt);
  report_lb->add_option("--format", lb_format)->check(CLI::IsMember({"table", "csv", "json"}));
  report_lb->add_flag("--complete-only", complete_only, "skip sessions still awaiting grades");

  // machine
  auto* machine_cmd = app.add_subcommand("machine", "intelligent-machine model")->require_subcommand(1);
  auto* machine_classify = machine_cmd->add_subcommand("classify", "classify a recorded life cycle");
  std::string trace_path;
  machine_classify->add_option("trace", trace_path, "JSON with initial, final and trace")->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the grading and proctoring API");
  std::string listen;
  serve_cmd->add_option("--listen", listen, "host:port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*bank_validate) {
      const IntelligenceScale scale = default_scale();
      try {
        const QuestionBank bank = load_bank_file(bank_path, scale);
        std::size_t lo = SIZE_MAX, hi = 0;
        for (const auto& s : scale.subtests) {
          const std::size_t n = bank.subtest_questions(s.id).size();
          lo = std::min(lo, n);
          hi = std::max(hi, n);
        }
        const std::string per = lo == hi ? std::to_string(lo) : fmt::format("{}-{}", lo, hi);
        out << fmt::format("valid: {} questions for scale {}, conforming={} ({}/subtest)\n",
                           bank.questions().size(), bank.scale_id(), bank.conforming() ? "true" : "false", per);
      } catch (const BankError& e) {
        json problems = json::array();
        for (const auto& p : e.problems()) problems.push_back({{"id", p.question_id}, {"reason", p.reason}});
        err << json{{"error", e.code()}, {"message", e.what()}, {"problems", problems}}.dump() << '\n';
        return 1;
      }
      return 0;
    }

    if (*machine_classify) {
      json doc;
      try {
        doc = json::parse(read_file(trace_path));
      } catch (const json::exception& e) {
        throw Error("invalid_json", e.what());
      }
      std::vector<model::MachineEvent> trace;
      try {
        for (const auto& e : doc.value("trace", json::array())) trace.push_back(model::machine_event_from_json(e));
        const auto final_state = model::state_from_json(doc.at("final"));
        const auto initial = doc.contains("initial") ? model::state_from_json(doc.at("initial")) : final_state;
        out << json{{"type", model::to_string(model::classify_machine(trace, initial, final_state))},
                    {"events", trace.size()}}
                   .dump()
            << '\n';
      } catch (const json::exception& e) {
        throw Error("invalid_trace", e.what());
      }
      return 0;
    }

    if (*report_lb && !lb_golden.empty()) {
      const auto rows = stats::load_golden_csv(lb_golden);
      const auto members = stats::golden_members(rows);
      std::map<std::string, double> published;
      for (std::size_t i = 0; i < rows.size(); ++i) published[members[i].subject_id] = rows[i].published_deviation_iq;
      const auto result = stats::rank_cohort(members);
      if (lb_format == "json") {
        json j = stats::cohort_to_json(result);
        for (auto& row : j["rows"]) row["published_deviation_iq"] = published.at(row["subject_id"].get<std::string>());
        out << j.dump(2) << '\n';
      } else {
        out << (lb_format == "csv" ? golden_csv(result, published) : golden_table(result, published));
      }
      return 0;
    }

    Harness harness(make_config(opt));

    if (*paper_sample) {
      const TestPaper paper = harness.sample(seed);
      if (!paper_out.empty()) {
        write_file(paper_out, paper_to_json(paper).dump(2) + "\n");
      } else {
        harness.save_paper(paper);
      }
      out << paper.paper_id << '\n';
      return 0;
    }

    if (*subject_list) {
      for (const auto& e : harness.registry().entries()) {
        const auto& d = e.descriptor;
        out << fmt::format("{:<24} {:<18} in={:<28} out={}\n", d.subject_id, to_string(d.kind),
                           modalities_text(d.input_modalities), modalities_text(d.output_modalities));
      }
      return 0;
    }

    if (*session_run) {
      if (!run_paper.empty()) run.paper = run_paper;
      run.seed = run_seed;
      const auto& entry = harness.registry().at(run.subject_id);
      Session result;
      if (entry.descriptor.kind == SubjectKind::human) {
        auto channel = std::make_shared<ProctorChannel>();
        std::atomic<bool> done = false;
        std::exception_ptr failure;
        std::thread worker([&] {
          try {
            result = harness.run(run, channel);
          } catch (...) {
            failure = std::current_exception();
          }
          done = true;
        });
        console_proctor(*channel, done, in, out);
        worker.join();
        if (failure) std::rethrow_exception(failure);
      } else {
        result = harness.run(run);
      }
      out << session_summary_json(result).dump(2) << '\n';
      return 0;
    }

    if (*session_grade) {
      const Session s = harness.grade(grade_session, grade_question, verdict_from_string(grade_verdict), grader,
                                      allow_regrade);
      out << session_summary_json(s).dump(2) << '\n';
      return 0;
    }

    if (*session_show) {
      out << session_detail_json(harness.live(show_session)->snapshot()).dump(2) << '\n';
      return 0;
    }

    if (*session_list) {
      for (const auto& s : harness.sessions()) {
        out << fmt::format("{:<40} {:<16} {:<16} pending={}\n", s.session_id, to_string(s.status), s.cohort,
                           s.pending_count());
      }
      return 0;
    }

    if (*report_lb) {
      if (lb_cohort.empty()) throw Error("invalid_request", "give --cohort or --golden");
      const auto result = harness.leaderboard(lb_cohort, complete_only);
      if (lb_format == "json") {
        out << stats::cohort_to_json(result).dump(2) << '\n';
      } else {
        out << (lb_format == "csv" ? stats::cohort_to_csv(result) : stats::cohort_to_table(result));
      }
      return 0;
    }

    if (*serve_cmd) {
      const auto [host, port] = split_listen(listen.empty() ? harness.config().listen : listen);
      harness.bank();
      harness.registry();
      Service service(harness);
      const int bound = service.bind(host, port);
      out << fmt::format("listening on {}:{}\n", host, bound) << std::flush;
      service.serve();
      return 0;
    }
  } catch (const Error& e) {
    err << json{{"error", e.code()}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace aiq
