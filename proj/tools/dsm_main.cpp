// dsm: command-line driver for substitution-averaged attention parsing.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dsm/error.hpp"
#include "dsm/fixture_provider.hpp"
#include "dsm/pipeline.hpp"
#include "json.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string output_dir;
  std::string cache_dir;
  std::size_t workers = 0;
  std::vector<int> layers;
  std::vector<std::size_t> ks;
  std::string scheme;
  bool include_punct = false;
  bool quiet = false;
};

void add_pipeline_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", o.output_dir, "output_dir");
  cmd->add_option("--cache-dir", o.cache_dir, "cache_dir");
  cmd->add_option("--workers", o.workers, "workers");
  cmd->add_option("--layer", o.layers, "layers");
  cmd->add_option("--k", o.ks, "k_values");
  cmd->add_option("--scheme", o.scheme, "eval.scheme (UD|SUD)");
  cmd->add_flag("--include-punct", o.include_punct, "eval.exclude_punct = false");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress lines");
}

dsm::ExperimentConfig resolve(const Overrides& o) {
  dsm::ExperimentConfig cfg = dsm::load_config(o.config);
  dsm::apply_env_overrides(cfg);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (o.workers) cfg.workers = o.workers;
  if (!o.layers.empty()) cfg.layers = o.layers;
  if (!o.ks.empty()) cfg.k_values = o.ks;
  if (!o.scheme.empty()) cfg.eval.scheme = dsm::scheme_from_string(o.scheme);
  if (o.include_punct) cfg.eval.exclude_punct = false;
  return cfg;
}

struct ServeOptions {
  dsm::FixtureOptions fixture;
  std::string fail_op;
  long exit_after = -1;
  int delay_ms = 0;
};

// JSON-lines fixture backend on stdin/stdout.
int serve_fixture(const ServeOptions& o) {
  dsm::FixtureProvider provider(o.fixture);
  std::string line;
  long served = 0;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::uint64_t id = 0;
    std::string reply;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("op", "") == "hello") {
        std::cout << dsm::encode_handshake(provider.hello()) << std::endl;
        continue;
      }
      id = j.value("id", std::uint64_t{0});
      if (o.exit_after >= 0 && served >= o.exit_after) return 0;
      ++served;
      if (o.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(o.delay_ms));
      const dsm::ModelRequest req = dsm::decode_request(line);
      if (!o.fail_op.empty() && o.fail_op == dsm::to_string(req.op)) {
        reply = dsm::encode_error(id, "injected failure for " + o.fail_op);
      } else {
        reply = dsm::encode_response(provider.request(req));
      }
    } catch (const std::exception& e) {
      reply = dsm::encode_error(id, e.what());
    }
    std::cout << reply << std::endl;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dependency trees from substitution-averaged attention"};
  app.require_subcommand(1);

  Overrides o;
  struct Step {
    const char* name;
    const char* help;
    void (dsm::Pipeline::*run)();
  };
  const Step steps[] = {
      {"substitute", "generate substitution sets per k", &dsm::Pipeline::substitute},
      {"extract", "fetch attention for targets and variants into an archive", &dsm::Pipeline::extract},
      {"induce", "decode trees per layer and k", &dsm::Pipeline::induce},
      {"eval", "score trees against the gold treebank", &dsm::Pipeline::eval},
      {"sweep", "layer x k table of UUAS", &dsm::Pipeline::sweep},
      {"agreement", "subject-verb edge recall on relative-clause templates", &dsm::Pipeline::agreement},
      {"headsel", "supervised head selection and directed parsing", &dsm::Pipeline::headsel},
  };
  std::vector<std::pair<CLI::App*, const Step*>> commands;
  for (const Step& s : steps) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_pipeline_options(cmd, o);
    commands.emplace_back(cmd, &s);
  }
  CLI::App* run = app.add_subcommand("run", "substitute, extract, induce and eval in order");
  add_pipeline_options(run, o);
  CLI::App* show = app.add_subcommand("config", "print the resolved config and its hash");
  add_pipeline_options(show, o);
  CLI::App* hello = app.add_subcommand("hello", "start the provider and print its handshake");
  add_pipeline_options(hello, o);

  ServeOptions so;
  CLI::App* serve = app.add_subcommand("serve-fixture", "answer provider requests on stdio from the fixture backend");
  serve->add_option("--model", so.fixture.model, "model name");
  serve->add_option("--seed", so.fixture.seed, "seed");
  serve->add_option("--layers", so.fixture.layers, "layer count");
  serve->add_option("--heads", so.fixture.heads, "heads per layer");
  serve->add_flag("--split-subwords", so.fixture.split_subwords, "wordpiece-like tokenization");
  serve->add_option("--fail-op", so.fail_op, "answer this op with an error payload");
  serve->add_option("--exit-after", so.exit_after, "exit after this many requests");
  serve->add_option("--delay-ms", so.delay_ms, "delay before each answer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (serve->parsed()) return serve_fixture(so);
    const dsm::ExperimentConfig cfg = resolve(o);
    if (show->parsed()) {
      std::cout << dsm::config_to_json(cfg) << "config_hash " << dsm::config_hash(cfg) << '\n';
      return 0;
    }
    if (hello->parsed()) {
      dsm::validate_config(cfg);
      const dsm::Handshake hs = dsm::make_provider(cfg)->hello();
      std::cout << dsm::encode_handshake(hs) << '\n';
      return 0;
    }
    dsm::Pipeline pipeline(cfg, o.quiet ? nullptr : &std::cerr);
    if (run->parsed()) {
      pipeline.substitute();
      pipeline.extract();
      pipeline.induce();
      pipeline.eval();
      return 0;
    }
    for (const auto& [cmd, step] : commands) {
      if (cmd->parsed()) (pipeline.*(step->run))();
    }
    return 0;
  } catch (const dsm::Error& e) {
    std::cerr << "dsm: error: " << e.what() << '\n';
    return dsm::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dsm: internal error: " << e.what() << '\n';
    return 1;
  }
}
