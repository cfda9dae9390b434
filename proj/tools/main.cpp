#include <iostream>
#include <map>
#include <new>

#include "cli_common.hpp"
#include "commands.hpp"
#include "specklediff/errors.hpp"

using namespace specklediff;

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised diffusion denoiser for speckled b-scans", "specklediff"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "specklediff 0.1.0");
  cli::add_config_option(app);

  std::map<const CLI::App*, cli::Action> actions;
  const auto add = [&](cli::Action (*registrar)(CLI::App&)) {
    const auto before = app.get_subcommands({}).size();
    cli::Action action = registrar(app);
    actions[app.get_subcommands({}).at(before)] = std::move(action);
  };
  add(cli::add_synth);
  add(cli::add_selffuse);
  add(cli::add_train);
  add(cli::add_denoise);
  add(cli::add_sweep);
  add(cli::add_eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return cli::report_error("usage", e.what(), 2);
  }

  try {
    for (const CLI::App* sub : app.get_subcommands()) actions.at(sub)();
  } catch (const cli::UsageError& e) {
    return cli::report_error("usage", e.what(), 2);
  } catch (const ConfigError& e) {
    return cli::report_error(e.kind(), e.what(), 2);
  } catch (const Error& e) {
    return cli::report_error(e.kind(), e.what(), 1);
  } catch (const std::bad_alloc&) {
    return cli::report_error("memory", "out of memory", 1);
  } catch (const std::exception& e) {
    return cli::report_error("internal", e.what(), 1);
  }
  return 0;
}
