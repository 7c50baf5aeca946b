#include "lidarint_cli/commands.hpp"

#include <array>
#include <sstream>

#include "lidarint/error.hpp"
#include "lidarint/evaluation.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/ontology.hpp"
#include "lidarint/synthetic.hpp"
#include "lidarint_cli/dataset.hpp"
#include "lidarint_cli/parallel.hpp"

namespace lidarint::cli {

namespace fs = std::filesystem;

namespace {

Ontology load_ontology(const PipelineConfig& config) {
  return config.ontology.empty() ? Ontology::identity() : Ontology::load(config.ontology);
}

// Keeps a loaded regressor alive for as long as the provider is used.
struct AlphaSource {
  std::optional<MlpModel> model;
  AlphaProvider provider;
};

void init_alpha_source(AlphaSource& src, const PipelineConfig& config) {
  if (config.alpha_source == "regressor") {
    src.model = load_model(config.alpha_model);
    src.provider = regressor_alpha(*src.model);
  } else {
    src.provider = analytic_alpha();
  }
}

std::vector<ScanEntry> require_scans(const fs::path& dir) {
  auto entries = list_dataset(dir);
  if (entries.empty()) throw InsufficientDataError("no scans found in '" + dir.string() + "'");
  return entries;
}

std::string rejection_summary(const RejectionCounts& r) {
  std::ostringstream s;
  s << "self_return " << r.self_return << " near_range " << r.near_range << " far_range "
    << r.far_range << " degenerate_normal " << r.degenerate_normal << " grazing_angle "
    << r.grazing_angle;
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

}  // namespace

void cmd_synth(const SynthArgs& args, const PipelineConfig& config, std::size_t jobs,
               std::ostream& out) {
  const std::string scene_text = read_file_text(args.scene);
  const auto spec = synth::parse_scene_spec(scene_text);
  const auto ontology = load_ontology(config);
  const std::string header = artifact_header("synth", config);
  ensure_dir(args.out / "scans");
  ensure_dir(args.out / "labels");
  ensure_dir(args.out / "truth");

  const auto counts = parallel_map(config.synth_scans, jobs, [&](std::size_t i) {
    synth::SensorSimConfig sim;
    sim.seed = config.seed + i;
    sim.emitted_power = config.emitted_power;
    sim.near_range = {config.near_range_threshold, config.near_range_shape};
    sim.mode = config.synth_mode == "velodyne" ? synth::SimMode::simulated_velodyne
                                               : synth::SimMode::raw_ouster;
    sim.velodyne_c = config.velodyne_c;
    const auto result = synth::generate_scene(spec, sim);
    const std::string stem = scan_stem(i);
    write_scan(result.scan, args.out / "scans" / (stem + ".bin"));
    write_labels(result.scan.labels(), ontology, args.out / "labels" / (stem + ".label"));
    synth::write_truth(result.truth, args.out / "truth" / (stem + ".txt"), header);
    return result.scan.size();
  });

  std::ostringstream manifest;
  manifest << "# lidarint synthetic dataset\n" << comment_block(header) << "# scene\n"
           << comment_block(scene_text);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    manifest << "scan " << scan_stem(i) << " points " << counts[i] << '\n';
    out << "scan " << scan_stem(i) << ": " << counts[i] << " points\n";
  }
  write_file_atomic(args.out / "manifest.txt", manifest.str());
}

void cmd_fit_alpha(const FitAlphaArgs& args, const PipelineConfig& config, std::size_t jobs,
                   std::ostream& out) {
  const auto entries = require_scans(args.input);
  const auto ontology = load_ontology(config);
  const auto gate = config.limits().gate;

  struct Sample {
    IntensitySample is;
    FeatureVector features;
  };
  using PerClass = std::array<std::vector<Sample>, kClassCount>;

  const auto per_scan = parallel_map(entries.size(), jobs, [&](std::size_t i) {
    const auto loaded = load_entry(entries[i], config.input_sensor(), ontology, true);
    const Scan& scan = loaded.scan;
    if (scan.sensor() != SensorKind::ouster_raw) {
      throw PreconditionError("fit-alpha needs Ouster raw scans; convert Velodyne scans first "
                              "(convert-velodyne)");
    }
    PerClass samples;
    if (scan.empty()) return samples;
    const auto index = build_index(scan, config.ball_radius);
    const auto normals = estimate_normals(scan, index, config.normal_options());
    const auto labels = scan.labels();
    for (std::size_t k = 0; k < scan.size(); ++k) {
      const Point& p = scan[k];
      if (labels[k] == ClassId::void_ || is_self_return(p) || !gate.contains(p.range()) ||
          !normals[k].trusted) {
        continue;
      }
      samples[index_of(labels[k])].push_back(
          {{p.intensity, p.range()}, FeatureVector(normals[k].normal, beam_direction(p))});
    }
    return samples;
  });

  std::vector<AlphaExample> examples;
  std::ostringstream bins_report;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    std::vector<IntensitySample> is;
    std::vector<const FeatureVector*> fv;
    for (const auto& scan_samples : per_scan) {
      for (const auto& s : scan_samples[c]) {
        is.push_back(s.is);
        fv.push_back(&s.features);
      }
    }
    if (is.empty()) continue;
    const auto extraction = extract_alpha_ground_truth(is, gate, config.alpha_bin_options());
    std::size_t usable = 0;
    for (const auto& b : extraction.table.bins()) usable += b.usable ? 1 : 0;
    std::size_t kept = 0;
    for (std::size_t k = 0; k < is.size(); ++k) {
      if (!extraction.alpha[k]) continue;
      examples.push_back({*fv[k], *extraction.alpha[k]});
      ++kept;
    }
    bins_report << "class " << class_name(class_from_index(c)) << " samples " << is.size()
                << " examples " << kept << " usable_bins " << usable << '\n';
  }

  const auto result = train(examples, config.train_config());
  const std::string header = artifact_header("fit-alpha", config);
  save_model(result.model, args.model, header);

  std::ostringstream report;
  report << "# lidarint alpha regressor training report\n" << comment_block(header);
  report << bins_report.str();
  report << "examples " << examples.size() << '\n';
  report << "train_count " << result.train_count << '\n';
  report << "validation_count " << result.validation_count << '\n';
  report << "final_validation_mae " << format_double(result.final_validation_mae) << '\n';
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    report << "epoch " << e + 1 << " train_loss " << format_double(result.train_loss[e])
           << " validation_loss " << format_double(result.validation_loss[e]) << '\n';
  }
  const fs::path report_path =
      args.report ? *args.report : fs::path(args.model.string() + ".report.txt");
  write_file_atomic(report_path, report.str());

  out << "examples=" << examples.size() << '\n';
  out << "final_validation_mae=" << format_double(result.final_validation_mae) << '\n';
}

void cmd_profile(const ProfileArgs& args, const PipelineConfig& config, std::size_t jobs,
                 std::ostream& out) {
  const auto entries = require_scans(args.input);
  const auto ontology = load_ontology(config);
  AlphaSource alpha;
  init_alpha_source(alpha, config);

  struct Part {
    std::vector<LabeledIntensity> samples;
    RejectionCounts rejected;
  };
  const auto parts = parallel_map(entries.size(), jobs, [&](std::size_t i) {
    const auto loaded = load_entry(entries[i], config.input_sensor(), ontology, true);
    const Scan& scan = loaded.scan;
    Part part;
    if (scan.empty()) return part;
    const auto index = build_index(scan, config.ball_radius);
    const auto normals = estimate_normals(scan, index, config.normal_options());
    const auto calibrated = calibrate_scan(scan, normals, config.limits(), alpha.provider);
    part.samples = labeled_intensities(calibrated, scan);
    part.rejected = calibrated.rejected;
    return part;
  });

  std::vector<LabeledIntensity> samples;
  RejectionCounts rejected;
  for (const auto& p : parts) {
    samples.insert(samples.end(), p.samples.begin(), p.samples.end());
    rejected += p.rejected;
  }
  auto set = build_profiles(samples, config.profile_options());
  if (set.empty()) {
    std::string msg = "no class reached profile_min_support=" +
                      std::to_string(config.profile_min_support) + " calibrated points";
    for (const auto& e : set.excluded()) {
      msg += "; " + std::string(class_name(e.cls)) + " has " + std::to_string(e.support);
    }
    throw InsufficientDataError(msg);
  }
  std::vector<std::pair<std::string, std::string>> settings;
  for (const auto& f : config_fields()) settings.emplace_back(f.name, f.get(config));
  set.set_settings(std::move(settings));
  save_profiles(set, args.out, artifact_header("profile", config));

  for (const auto& p : set.profiles()) {
    out << "class " << class_name(p.cls) << " mode " << format_double(p.mode) << " support "
        << p.support << '\n';
  }
  for (const auto& e : set.excluded()) {
    out << "excluded " << class_name(e.cls) << " support " << e.support << '\n';
  }
  out << "rejected " << rejection_summary(rejected) << '\n';
}

void cmd_segment(const SegmentArgs& args, const PipelineConfig& config, std::size_t jobs,
                 std::ostream& out) {
  const auto profiles = load_profiles(args.profiles);
  if (profiles.empty()) throw PreconditionError("profile file holds no class profiles");
  const auto entries = require_scans(args.input);
  const auto ontology = load_ontology(config);
  AlphaSource alpha;
  init_alpha_source(alpha, config);
  const auto settings = config.segmentation_settings();
  ensure_dir(args.out / "labels");

  struct Stats {
    std::size_t points = 0;
    std::size_t classified = 0;
    RejectionCounts rejected;
  };
  const auto stats = parallel_map(entries.size(), jobs, [&](std::size_t i) {
    const auto loaded = load_entry(entries[i], config.input_sensor(), ontology, false);
    const Scan& scan = loaded.scan;
    Segmentation seg;
    if (!scan.empty()) seg = classify_scan(scan, profiles, settings, alpha.provider);
    write_labels(seg.labels, ontology, args.out / "labels" / (entries[i].stem + ".label"));
    return Stats{scan.size(), seg.classified, seg.rejected};
  });

  std::ostringstream report;
  report << "# lidarint segmentation report\n"
         << comment_block(artifact_header("segment", config));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& s = stats[i];
    report << "scan " << entries[i].stem << " points " << s.points << " classified "
           << s.classified << ' ' << rejection_summary(s.rejected) << '\n';
    out << "scan " << entries[i].stem << ": " << s.classified << '/' << s.points
        << " points classified\n";
  }
  write_file_atomic(args.out / "segment_report.txt", report.str());
}

void cmd_convert_velodyne(const ConvertArgs& args, const PipelineConfig& config, std::size_t jobs,
                          std::ostream& out) {
  if (!args.pair && !args.curve) {
    throw PreconditionError(
        "convert-velodyne needs either --pair (an Ouster dataset to fit Q) or --curve (a saved "
        "transfer curve)");
  }
  if (args.pair && args.curve) throw PreconditionError("give either --pair or --curve, not both");
  const auto entries = require_scans(args.input);
  const auto ontology = load_ontology(config);
  const std::string header = artifact_header("convert-velodyne", config);

  const bool fitting = args.pair.has_value();
  auto velodyne = parallel_map(entries.size(), jobs, [&](std::size_t i) {
    return load_entry(entries[i], SensorKind::velodyne_preprocessed, ontology, fitting).scan;
  });

  std::ostringstream report;
  report << "# lidarint velodyne conversion report\n" << comment_block(header);

  TransferCurve curve;
  if (fitting) {
    const auto pair_entries = require_scans(*args.pair);
    const auto ouster = parallel_map(pair_entries.size(), jobs, [&](std::size_t i) {
      return load_entry(pair_entries[i], SensorKind::ouster_raw, ontology, true).scan;
    });
    const auto opts = config.max_curve_options();
    std::vector<QSeries> series;
    for (std::size_t c = 1; c < kClassCount; ++c) {
      const ClassId cls = class_from_index(c);
      try {
        const auto o = build_max_curve(ouster, cls, opts);
        const auto v = build_max_curve(velodyne, cls, opts);
        auto q = compute_q(o, v);
        if (q.samples.empty()) continue;
        report << "class " << class_name(cls) << " q_bins " << q.samples.size()
               << " zero_velodyne_bins " << q.zero_velodyne_bins << '\n';
        series.push_back(std::move(q));
      } catch (const InsufficientDataError&) {
        // class too sparse in one of the sensors
      }
    }
    if (series.empty()) {
      throw InsufficientDataError(
          "no class has enough points in both sensors to build max-intensity curves");
    }
    if (series.size() >= 2) {
      for (const auto& r : check_class_independence(series)) {
        report << "ratio " << class_name(r.numerator) << '/' << class_name(r.denominator)
               << " bins " << r.ratios.size() << " mean " << format_double(r.mean)
               << " max_deviation " << format_double(r.max_deviation) << '\n';
      }
    }
    curve = fit_transfer(pool_q_samples(series), config.transfer_degree, config.basis());
    ensure_dir(args.out);
    save_transfer_curve(curve, args.out / "transfer_curve.txt", header);
    out << "fitted " << to_string(curve.basis()) << " degree " << curve.degree()
        << " relative_rms " << format_double(curve.relative_rms()) << '\n';
  } else {
    curve = load_transfer_curve(*args.curve);
  }

  ensure_dir(args.out / "scans");
  const auto dropped = parallel_map(entries.size(), jobs, [&](std::size_t i) {
    const auto converted = convert_velodyne(velodyne[i], curve);
    write_scan(converted.scan, args.out / "scans" / (entries[i].stem + ".bin"));
    if (converted.scan.has_labels()) {
      ensure_dir(args.out / "labels");
      write_labels(converted.scan.labels(), ontology,
                   args.out / "labels" / (entries[i].stem + ".label"));
    }
    return converted.dropped_out_of_domain;
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    report << "scan " << entries[i].stem << " dropped_out_of_domain " << dropped[i] << '\n';
    out << "scan " << entries[i].stem << ": converted, " << dropped[i]
        << " points outside the curve domain\n";
  }
  ensure_dir(args.out);
  write_file_atomic(args.out / "convert_report.txt", report.str());
}

void cmd_evaluate(const EvaluateArgs& args, const PipelineConfig& config, std::size_t jobs,
                  std::ostream& out) {
  const auto gt = list_label_files(args.gt);
  const auto pred = list_label_files(args.pred);
  if (gt.empty()) {
    throw InsufficientDataError("no label files found in '" + args.gt.string() + "'");
  }
  if (gt.size() != pred.size()) {
    throw PreconditionError("ground truth has " + std::to_string(gt.size()) +
                            " label files, prediction has " + std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i].stem != pred[i].stem) {
      throw PreconditionError("label file '" + gt[i].stem + "' has no prediction counterpart");
    }
  }
  const auto ontology = load_ontology(config);
  const ScoringOptions scoring{config.in_gate_only};

  const auto map_labels = [&](const fs::path& path) {
    const auto raw = read_raw_labels(path);
    std::vector<ClassId> out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
      out[k] = ontology.map(static_cast<std::uint16_t>(raw[k] & 0xFFFFu));
    }
    return out;
  };
  const auto parts = parallel_map(gt.size(), jobs, [&](std::size_t i) {
    const auto g = map_labels(*gt[i].label_path);
    const auto p = map_labels(*pred[i].label_path);
    if (g.size() != p.size()) {
      throw PreconditionError("'" + gt[i].stem + "': ground truth has " +
                              std::to_string(g.size()) + " labels, prediction has " +
                              std::to_string(p.size()));
    }
    ConfusionMatrix cm;
    cm.accumulate(g, p, scoring);
    return cm;
  });
  ConfusionMatrix total;
  for (const auto& cm : parts) total += cm;
  const auto report = iou(total);
  const std::string table = format_iou_table(report);
  const std::string kv = format_iou_key_values(report);
  out << table << kv;
  if (args.out) {
    write_file_atomic(*args.out, "# lidarint evaluation report\n" +
                                     comment_block(artifact_header("evaluate", config)) + table +
                                     kv);
  }
}

}  // namespace lidarint::cli
