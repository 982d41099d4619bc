#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "metaqa/cli.hpp"

int main(int argc, char** argv) {
  // keep stdout for command output
  spdlog::set_default_logger(spdlog::stderr_color_mt("metaqa"));
  return metaqa::run_cli(argc, argv, std::cout, std::cerr);
}
