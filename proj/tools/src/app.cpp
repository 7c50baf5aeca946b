#include "lidarint_cli/app.hpp"

#include <filesystem>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "lidarint/error.hpp"
#include "lidarint_cli/commands.hpp"
#include "lidarint_cli/config.hpp"

namespace lidarint::cli {

namespace {

int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::internal ? kExitInternal : kExitUser;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& getenv) {
  CLI::App app{"LiDAR intensity calibration and terrain classification pipeline", "lidarint"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LIDARINT_VERSION);

  std::string config_file;
  std::size_t jobs = 1;
  app.add_option("--config", config_file,
                 "config file of `key = value` lines (also LIDARINT_CONFIG)");
  app.add_option("--jobs,-j", jobs, "worker threads for per-scan work")
      ->check(CLI::PositiveNumber);

  std::map<std::string, std::string> flag_values;
  std::map<std::string, std::string> raw_flags;
  for (const auto& f : config_fields()) {
    app.add_option("--" + f.name, raw_flags[f.name], f.help)->group("Pipeline config");
  }

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate synthetic scans from a scene file");
  c_synth->add_option("--scene", synth.scene, "scene description file")->required();
  c_synth->add_option("--out", synth.out, "output dataset directory")->required();

  FitAlphaArgs fit;
  auto* c_fit = app.add_subcommand("fit-alpha", "train the incidence-angle regressor");
  c_fit->add_option("--input", fit.input, "labeled Ouster dataset directory")->required();
  c_fit->add_option("--model", fit.model, "output model file")->required();
  std::string fit_report;
  c_fit->add_option("--report", fit_report, "training report file (default <model>.report.txt)");

  ProfileArgs prof;
  auto* c_prof = app.add_subcommand("profile", "build per-class calibrated-intensity profiles");
  c_prof->add_option("--input", prof.input, "labeled Ouster dataset directory")->required();
  c_prof->add_option("--out", prof.out, "output profile file")->required();

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "label scans by nearest profile mode");
  c_seg->add_option("--input", seg.input, "dataset directory to label")->required();
  c_seg->add_option("--profiles", seg.profiles, "profile file")->required();
  c_seg->add_option("--out", seg.out, "output directory for label files")->required();

  ConvertArgs conv;
  auto* c_conv = app.add_subcommand("convert-velodyne",
                                    "convert Velodyne intensities to the raw Ouster form");
  c_conv->add_option("--input", conv.input, "Velodyne dataset directory")->required();
  std::string conv_pair, conv_curve;
  c_conv->add_option("--pair", conv_pair, "labeled Ouster dataset used to fit the transfer curve");
  c_conv->add_option("--curve", conv_curve, "saved transfer curve file");
  c_conv->add_option("--out", conv.out, "output directory")->required();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "score predicted labels against ground truth");
  c_eval->add_option("--gt", ev.gt, "ground-truth label directory")->required();
  c_eval->add_option("--pred", ev.pred, "predicted label directory")->required();
  std::string eval_out;
  c_eval->add_option("--out", eval_out, "report file");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    for (const auto& f : config_fields()) {
      if (app.count("--" + f.name) > 0) flag_values[f.name] = raw_flags[f.name];
    }
    PipelineConfig config;
    if (config_file.empty()) {
      if (const char* env = getenv("LIDARINT_CONFIG"); env != nullptr) config_file = env;
    }
    if (!config_file.empty()) apply_config_file(config, config_file);
    apply_environment(config, getenv);
    apply_overrides(config, flag_values);
    config.validate();

    if (c_synth->parsed()) {
      cmd_synth(synth, config, jobs, out);
    } else if (c_fit->parsed()) {
      if (!fit_report.empty()) fit.report = fit_report;
      cmd_fit_alpha(fit, config, jobs, out);
    } else if (c_prof->parsed()) {
      cmd_profile(prof, config, jobs, out);
    } else if (c_seg->parsed()) {
      cmd_segment(seg, config, jobs, out);
    } else if (c_conv->parsed()) {
      if (!conv_pair.empty()) conv.pair = conv_pair;
      if (!conv_curve.empty()) conv.curve = conv_curve;
      cmd_convert_velodyne(conv, config, jobs, out);
    } else if (c_eval->parsed()) {
      if (!eval_out.empty()) ev.out = eval_out;
      cmd_evaluate(ev, config, jobs, out);
    }
  } catch (const Error& e) {
    err << "lidarint: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "lidarint: io error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    err << "lidarint: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace lidarint::cli
