#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "common.hpp"

int main(int argc, char** argv) {
  using namespace cbwatch;
  // Logs go to stderr; stdout carries data.
  spdlog::set_default_logger(spdlog::stderr_color_mt("cbwatch"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"cbwatch: incident-level cyberbullying moderation pipeline"};
  app.require_subcommand(1);
  app.add_option("--log-level", "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->each([](const std::string& level) { spdlog::set_level(spdlog::level::from_str(level)); });

  cli::add_synth(app);
  cli::add_stats(app);
  cli::add_label(app);
  cli::add_init(app);
  cli::add_serve(app);
  cli::add_annotate(app);
  cli::add_export(app);
  cli::add_detect(app);
  cli::add_forecast(app);
  cli::add_eval(app);
  cli::add_prompts(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return cli::g_status;
}
