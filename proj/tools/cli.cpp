// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "tasc/conformance.hpp"
#include "tasc/dsl.hpp"
#include "tasc/error.hpp"
#include "tasc/ingest.hpp"
#include "tasc/render.hpp"
#include "tasc/synthesis.hpp"
#include "tasc/trace.hpp"
#include "tasc/validator.hpp"

namespace tasc::cli {

namespace {

// Carries an exit code out of a subcommand body.
struct Exit {
  int code;
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  bool color = false;

  std::string paint(std::string_view text, const char* ansi) const {
    if (!color) return std::string(text);
    return std::string("\x1b[") + ansi + "m" + std::string(text) + "\x1b[0m";
  }
};

std::string read_input(const std::string& path, Io& io) {
  std::ostringstream ss;
  if (path == "-") {
    ss << io.in.rdbuf();
    return ss.str();
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("IO", "cannot read '" + path + "'");
  ss << f.rdbuf();
  return ss.str();
}

// Writes via a sibling temp file and rename so readers never see a partial
// file. `-` writes to stdout.
void write_output(const std::string& path, const std::string& data, Io& io) {
  if (path == "-") {
    io.out << data;
    return;
  }
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("IO", "cannot write '" + tmp.string() + "'");
    f << data;
    f.flush();
    if (!f) throw Error("IO", "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("IO", "cannot replace '" + path + "'");
  }
}

void print_parse_diagnostics(const ParseResult& r, Io& io) {
  for (const auto& d : r.diagnostics) {
    std::string line = format(d);
    io.err << (d.severity == Severity::Error ? io.paint(line, "31") : io.paint(line, "33")) << "\n";
  }
}

CaremapSet load_set(const std::vector<std::string>& files, Io& io) {
  CaremapSet merged;
  for (const auto& file : files) {
    auto text = read_input(file, io);
    auto r = parse(text, file == "-" ? "<stdin>" : file);
    print_parse_diagnostics(r, io);
    if (!r.ok()) throw Exit{kInputError};
    for (auto& [id, m] : r.set->caremaps) {
      if (merged.caremaps.count(id)) {
        io.err << io.paint(file + ": error[E-DUP]: caremap '" + id + "' is defined in more than one file", "31")
               << "\n";
        throw Exit{kInputError};
      }
      merged.caremaps.emplace(id, std::move(m));
    }
    for (auto& l : r.set->links) merged.links.push_back(std::move(l));
  }
  return merged;
}

CaremapSet load_set(const std::string& file, Io& io) { return load_set(std::vector<std::string>{file}, io); }

// Refuses to run analyses on an invalid set; prints only the errors.
void require_valid(const CaremapSet& set, Io& io) {
  auto diags = validate(set);
  if (!has_errors(diags)) return;
  for (const auto& d : diags) {
    if (d.severity == Severity::Error) io.err << io.paint(format(d), "31") << "\n";
  }
  io.err << "caremap set is not valid; run `tasc validate` for details\n";
  throw Exit{kFailures};
}

nlohmann::json read_json(const std::string& path, Io& io) {
  auto text = read_input(path, io);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("ModelFormat", path + ": " + e.what());
  }
}

bool is_input_error(const std::string& code) {
  return code == "IO" || code == "ParseError" || code == "CsvFormat" || code == "ModelFormat" ||
         code == "TraceFormat";
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Io io{in, out, err};
  if (const char* c = std::getenv("TASC_COLOR")) io.color = std::string(c) == "1";

  CLI::App app{"TaSC caremap toolkit", "tasc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tasc 1.0.0");

  std::function<int()> action;

  // validate
  std::vector<std::string> v_files;
  bool v_strict = false, v_multi = false;
  std::string v_format = "text";
  auto* validate_cmd = app.add_subcommand("validate", "Check structural rules and lints");
  validate_cmd->add_option("files", v_files, "Caremap notation files")->required();
  validate_cmd->add_flag("--strict", v_strict, "Treat warnings as errors");
  validate_cmd->add_flag("--allow-multiple-entries", v_multi, "Downgrade multiple entries to a warning");
  validate_cmd->add_option("--format", v_format)->check(CLI::IsMember({"text", "json"}));
  validate_cmd->callback([&] {
    action = [&] {
      auto set = load_set(v_files, io);
      ValidatorConfig config;
      config.strict = v_strict;
      config.allow_multiple_entries = v_multi;
      auto diags = validate(set, config);
      if (v_format == "json") {
        io.out << to_json(diags).dump(2) << "\n";
      } else {
        std::size_t errors = 0, warnings = 0;
        for (const auto& d : diags) {
          bool is_error = d.severity == Severity::Error;
          (is_error ? errors : warnings)++;
          io.out << io.paint(format(d), is_error ? "31" : "33") << "\n";
        }
        io.out << set.caremaps.size() << " caremap(s): " << errors << " error(s), " << warnings << " warning(s)\n";
      }
      return has_errors(diags) ? kFailures : kOk;
    };
  });

  // fmt
  std::string f_file, f_out = "-", f_format = "tasc";
  bool f_check = false;
  auto* fmt_cmd = app.add_subcommand("fmt", "Print the canonical form");
  fmt_cmd->add_option("file", f_file)->required();
  fmt_cmd->add_flag("--check", f_check, "Exit 1 if the file is not already canonical");
  fmt_cmd->add_option("--out", f_out, "Output path (default stdout)");
  fmt_cmd->add_option("--format", f_format)->check(CLI::IsMember({"tasc", "json"}));
  fmt_cmd->callback([&] {
    action = [&] {
      auto text = read_input(f_file, io);
      auto r = parse(text, f_file);
      print_parse_diagnostics(r, io);
      if (!r.ok()) return static_cast<int>(kInputError);
      std::string canonical = f_format == "json" ? to_json(*r.set) : serialize(*r.set);
      if (f_check) {
        if (canonical == text) return static_cast<int>(kOk);
        io.err << f_file << ": not in canonical form\n";
        return static_cast<int>(kFailures);
      }
      write_output(f_out, canonical, io);
      return static_cast<int>(kOk);
    };
  });

  // render
  std::string r_file, r_out, r_style = "mono";
  auto* render_cmd = app.add_subcommand("render", "Emit DOT");
  render_cmd->add_option("file", r_file)->required();
  render_cmd->add_option("--out", r_out, "DOT output path, or - for stdout")->required();
  render_cmd->add_option("--style", r_style)->check(CLI::IsMember({"mono", "color"}));
  render_cmd->callback([&] {
    action = [&] {
      auto set = load_set(r_file, io);
      write_output(r_out, to_dot(set, r_style == "color" ? StyleProfile::color() : StyleProfile::mono()), io);
      return static_cast<int>(kOk);
    };
  });

  // paths
  std::string p_file, p_caremap;
  int p_bound = 0;
  std::size_t p_cap = kDefaultPathCap;
  auto* paths_cmd = app.add_subcommand("paths", "List entry-to-terminal paths of one caremap");
  paths_cmd->add_option("file", p_file)->required();
  paths_cmd->add_option("--caremap", p_caremap)->required();
  paths_cmd->add_option("--cycle-bound", p_bound, "Extra visits allowed per node")->check(CLI::NonNegativeNumber);
  paths_cmd->add_option("--max-paths", p_cap)->check(CLI::PositiveNumber);
  paths_cmd->callback([&] {
    action = [&] {
      auto set = load_set(p_file, io);
      const auto* m = set.find(p_caremap);
      if (!m) {
        io.err << "no caremap '" << p_caremap << "'\n";
        return static_cast<int>(kUsage);
      }
      std::vector<std::vector<std::string>> paths;
      try {
        paths = enumerate_paths(*m, p_bound, p_cap);
      } catch (const Error& e) {
        io.err << e.code() << ": " << e.what() << "\n";
        return static_cast<int>(kFailures);
      }
      for (const auto& p : paths) {
        for (std::size_t i = 0; i < p.size(); ++i) io.out << (i ? " -> " : "") << p[i];
        io.out << "\n";
      }
      io.out << paths.size() << " path(s)\n";
      return static_cast<int>(kOk);
    };
  });

  // conform
  std::string c_file, c_traces, c_entry, c_format = "text", c_out = "-";
  int c_workers = 1;
  bool c_fail_undetermined = false;
  auto* conform_cmd = app.add_subcommand("conform", "Replay JSONL traces against a caremap set");
  conform_cmd->add_option("file", c_file)->required();
  conform_cmd->add_option("--traces", c_traces)->required();
  conform_cmd->add_option("--entry", c_entry, "Caremap the walk starts in")->required();
  conform_cmd->add_option("--format", c_format)->check(CLI::IsMember({"text", "json"}));
  conform_cmd->add_option("--out", c_out, "Report path (default stdout)");
  conform_cmd->add_option("--workers", c_workers)->check(CLI::PositiveNumber);
  conform_cmd->add_flag("--fail-undetermined", c_fail_undetermined, "Exit 1 on Undetermined traces too");
  conform_cmd->callback([&] {
    action = [&] {
      auto set = load_set(c_file, io);
      require_valid(set, io);
      std::istringstream lines(read_input(c_traces, io));
      auto file = read_jsonl(lines);
      auto summary = batch_conform(set, c_entry, file.traces, c_workers);
      for (const auto& e : file.errors) {
        summary.load_errors.emplace_back("line " + std::to_string(e.line), e.message);
      }
      write_output(c_out, c_format == "json" ? to_json(summary).dump(2) + "\n" : format_table(summary), io);
      bool fail = summary.non_conformant > 0 || (c_fail_undetermined && summary.undetermined > 0);
      return static_cast<int>(fail ? kFailures : kOk);
    };
  });

  // ingest
  std::string i_csv, i_caremaps, i_out;
  std::uint64_t i_seed = 0;
  auto* ingest_cmd = app.add_subcommand("ingest", "Turn contingency counts into a transition model");
  ingest_cmd->add_option("csv", i_csv)->required();
  ingest_cmd->add_option("--caremaps", i_caremaps)->required();
  ingest_cmd->add_option("--out", i_out)->required();
  ingest_cmd->add_option("--seed", i_seed, "master_seed recorded in the model");
  ingest_cmd->callback([&] {
    action = [&] {
      auto set = load_set(i_caremaps, io);
      std::istringstream csv(read_input(i_csv, io));
      auto rows = read_contingency_csv(csv);
      auto model = derive_model(rows, set, i_seed);
      write_output(i_out, to_json(model).dump(2) + "\n", io);
      return static_cast<int>(kOk);
    };
  });

  // synth
  std::string s_file, s_model, s_entry, s_out;
  std::size_t s_n = 0;
  std::optional<std::uint64_t> s_seed;
  int s_workers = 1;
  std::size_t s_cap = 10000;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic traces");
  synth_cmd->add_option("file", s_file)->required();
  synth_cmd->add_option("--model", s_model)->required();
  synth_cmd->add_option("--entry", s_entry)->required();
  synth_cmd->add_option("-n,--count", s_n)->required();
  synth_cmd->add_option("--seed", s_seed, "Defaults to the model's master_seed");
  synth_cmd->add_option("--out", s_out)->required();
  synth_cmd->add_option("--workers", s_workers)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--step-cap", s_cap)->check(CLI::PositiveNumber);
  synth_cmd->callback([&] {
    action = [&] {
      auto set = load_set(s_file, io);
      require_valid(set, io);
      auto model = model_from_json(read_json(s_model, io));
      auto stm = compile_stm(set, s_entry, model);
      stm.step_cap = s_cap;
      std::uint64_t seed = s_seed.value_or(model.master_seed);
      auto traces = generate(stm, s_n, seed, s_workers);
      std::string text = "# " + provenance_header(stm, seed, s_n) + "\n";
      for (const auto& t : traces) text += to_jsonl_line(t) + "\n";
      write_output(s_out, text, io);
      return static_cast<int>(kOk);
    };
  });

  // synth-check
  std::string k_file, k_model, k_entry, k_traces, k_format = "text";
  double k_tol = 0.02;
  int k_workers = 1;
  auto* check_cmd = app.add_subcommand("synth-check", "Compare branch frequencies with the model");
  check_cmd->add_option("file", k_file)->required();
  check_cmd->add_option("--model", k_model)->required();
  check_cmd->add_option("--entry", k_entry)->required();
  check_cmd->add_option("--traces", k_traces)->required();
  check_cmd->add_option("--tolerance", k_tol)->check(CLI::NonNegativeNumber);
  check_cmd->add_option("--format", k_format)->check(CLI::IsMember({"text", "json"}));
  check_cmd->add_option("--workers", k_workers)->check(CLI::PositiveNumber);
  check_cmd->callback([&] {
    action = [&] {
      auto set = load_set(k_file, io);
      require_valid(set, io);
      auto stm = compile_stm(set, k_entry, model_from_json(read_json(k_model, io)));
      std::istringstream lines(read_input(k_traces, io));
      auto file = read_jsonl(lines);
      auto report = frequency_report(file.traces, stm, k_workers);
      if (k_format == "json") {
        auto j = to_json(report);
        j["tolerance"] = k_tol;
        io.out << j.dump(2) << "\n";
      } else {
        char buf[256];
        io.out << "caremap.node edge                             expected  empirical      |d|   visits\n";
        for (const auto& f : report.edges) {
          std::snprintf(buf, sizeof buf, "%-44s %9.6f %10.6f %8.6f %8zu\n",
                        (f.caremap + "." + f.node + " " + f.edge).c_str(), f.expected, f.empirical, f.delta,
                        f.visits);
          io.out << buf;
        }
        std::snprintf(buf, sizeof buf, "max |d| = %.6f (tolerance %.6f), %zu trace(s) used\n", report.max_delta, k_tol,
                      report.traces_used);
        io.out << buf;
      }
      return static_cast<int>(report.max_delta > k_tol ? kFailures : kOk);
    };
  });

  std::vector<const char*> argv{"tasc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, io.out, io.err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, io.out, io.err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, io.out, io.err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, io.out, io.err);
    return kUsage;
  }

  try {
    return action ? action() : static_cast<int>(kUsage);
  } catch (const Exit& e) {
    return e.code;
  } catch (const Error& e) {
    io.err << io.paint(e.code() + ": " + e.what(), "31") << "\n";
    return is_input_error(e.code()) ? kInputError : kFailures;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace tasc::cli
