// Command-line front end: bv-sharp <task> --config <path> [--key value ...]

#include <bvsharp/cli.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<bvsharp::cli::Assignment> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<bvsharp::cli::Assignment> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0)
      throw bvsharp::cli::ConfigError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw bvsharp::cli::ConfigError("flag --" + key + " needs a value");
      value = extras[++i];
    }
    out.push_back({key, value, 0});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharp BV Poincare-Sobolev constants: certificates, expansions and solver runs"};
  app.allow_extras();
  std::string task, config_path;
  app.add_option("task", task,
                 "constants | domain-certificate | domain-sweep | solve | surface-classify | "
                 "sphere-certificate | expansion-audit")
      ->required();
  app.add_option("--config", config_path, "key = value configuration file");
  app.footer(bvsharp::cli::csv_help());
  CLI11_PARSE(app, argc, argv);

  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw bvsharp::cli::ConfigError("cannot read config '" + config_path + "'");
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    auto overrides = collect_overrides(app.remaining());
    overrides.push_back({"task", task, 0});
    const auto cfg = bvsharp::cli::parse_config(text, overrides);
    const auto report = bvsharp::cli::run(cfg);
    bvsharp::cli::write_report(report, cfg.out);
    std::cout << "wrote " << cfg.out << "/summary.json and " << cfg.out << "/detail.csv\n";
    return 0;
  } catch (const bvsharp::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
