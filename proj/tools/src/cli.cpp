#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "halfspec/archive.hpp"
#include "halfspec/error.hpp"
#include "halfspec/grid.hpp"
#include "halfspec/metrics.hpp"
#include "halfspec/pipeline.hpp"
#include "halfspec/spectral.hpp"
#include "halfspec/synth.hpp"

namespace halfspec::cli {

namespace {

struct Options {
  std::string input, output, third;
  // compress
  double ratio = 10.0;
  std::string variant = "sequential";
  std::size_t M = 50;
  std::size_t J = 8;
  double d_min = 0.05;
  std::size_t seed_lat_stride = 2, seed_lon_stride = 4;
  bool d_min_across = false;
  std::string trace;
  // decompress / emulate
  std::string mode = "mean";
  std::optional<std::uint64_t> seed;
  std::size_t count = 1;
  // evaluate
  std::string archive;
  // synth
  std::optional<std::size_t> nlat, nlon, ntime;
  std::string spec;
  bool poles = false;
  // maps
  std::string kernel = "daniell";
  std::size_t bandwidth = 17;

  unsigned threads = 0;
  int verbosity = 0;
};

void note(const Options& o, std::ostream& err, const std::string& msg) {
  if (o.verbosity > 0) err << msg << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_floats(const std::string& path, const Grid& grid, const std::vector<double>& v) {
  std::vector<float> f(v.begin(), v.end());
  save_map(grid, f, path);
}

int do_compress(const Options& o, std::ostream& err) {
  CompressOptions opts;
  opts.selection.ratio = o.ratio;
  opts.selection.M = o.M;
  opts.selection.J = o.J;
  opts.selection.d_min = o.d_min;
  opts.selection.seed_grid_subsample = {o.seed_lat_stride, o.seed_lon_stride};
  opts.selection.variant = o.variant == "distributed" ? Variant::distributed : Variant::sequential;
  opts.selection.d_min_across_batches = o.d_min_across;
  opts.selection.threads = o.threads;
  opts.seed = o.seed.value_or(0);
  opts.selection.validate();

  auto [grid, cube] = load_cube(o.input);
  const auto t0 = std::chrono::steady_clock::now();
  CompressReport report;
  const CompressedArchive archive = compress(cube, opts, &report);
  write_archive(archive, o.output);
  note(o, err, "compressed " + std::to_string(archive.indices.size()) + " coefficients into " +
                   std::to_string(report.archive_bytes) + " bytes in " + std::to_string(seconds_since(t0)) + " s");
  if (!o.trace.empty()) {
    std::ofstream tr(o.trace);
    if (!tr) throw Error("cannot write " + o.trace);
    for (const auto& line : report.trace) tr << line << '\n';
  }
  for (std::size_t k = 0; k < report.kappa_at_bound.size(); ++k)
    if (report.kappa_at_bound[k]) note(o, err, "kappa at a search bound at frequency " + std::to_string(k));
  return kExitOk;
}

int do_decompress(const Options& o, std::ostream& err) {
  const auto mode = o.mode == "simulate" ? DecodeMode::simulate : DecodeMode::mean;
  if (mode == DecodeMode::simulate && !o.seed) throw InvalidInput("--seed is required with --mode simulate");
  const auto archive = read_archive(o.input);
  const auto t0 = std::chrono::steady_clock::now();
  const TimeCube cube = decompress(archive, mode, o.seed.value_or(0), o.threads);
  save_cube(cube.grid, cube, o.output);
  note(o, err, "decompressed in " + std::to_string(seconds_since(t0)) + " s");
  return kExitOk;
}

int do_emulate(const Options& o, std::ostream& err) {
  if (!o.seed) throw InvalidInput("--seed is required for emulate");
  if (o.count < 1) throw InvalidInput("--count must be at least 1");
  const auto archive = read_archive(o.input);
  for (std::size_t r = 0; r < o.count; ++r) {
    const TimeCube cube = decompress(archive, DecodeMode::simulate, derive_seed(*o.seed, r), o.threads);
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_%04zu.cube", r);
    save_cube(cube.grid, cube, o.output + suffix);
    note(o, err, "wrote realization " + std::to_string(r));
  }
  return kExitOk;
}

int do_evaluate(const Options& o, std::ostream& err) {
  if (!o.archive.empty() && !o.seed) throw InvalidInput("--seed is required with --archive");
  const auto [g1, original] = load_cube(o.input);
  const auto [g2, decompressed] = load_cube(o.output);
  if (!(g1 == g2) || original.T != decompressed.T) throw InvalidInput("cubes have different shapes");
  const auto t0 = std::chrono::steady_clock::now();
  FidelityReport report = rmspe(original, decompressed, pixel_area_weights(g1));
  report.original_contrasts = contrast_variances(original);
  if (!o.archive.empty()) {
    const auto archive = read_archive(o.archive);
    report.decompressed_contrasts =
        contrast_variances(decompress(archive, DecodeMode::simulate, *o.seed, o.threads));
  } else {
    report.decompressed_contrasts = contrast_variances(decompressed);
  }
  report.runtime_seconds = seconds_since(t0);
  emit_report(report, g1, o.third);
  note(o, err, "report written to " + o.third);
  return kExitOk;
}

int do_inspect(const Options& o, std::ostream& out) {
  std::ifstream in(o.input, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open " + o.input);
  const auto file_bytes = static_cast<std::size_t>(in.tellg());
  const auto a = read_archive(o.input);
  const auto budget = compute_budget(a.ratio, a.n(), a.T);
  const auto counts = stored_per_frequency(a);
  const auto index_bytes = encode_indices(a.indices, a.n()).size();
  std::size_t c0 = 0, cp = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) (is_real_frequency(k, a.T) ? c0 : cp) += counts[k];

  out << std::setprecision(6);
  out << "version " << a.version << "\n";
  out << "grid " << a.grid.n_lat() << " x " << a.grid.n_lon() << (a.grid.land_mask ? " (land mask)" : "")
      << "\nT " << a.T << "\nratio " << a.ratio << "\nvariant "
      << (a.variant == static_cast<std::uint8_t>(Variant::distributed) ? "distributed" : "sequential")
      << "\nseed " << a.seed << "\n";
  out << "budget_numbers " << budget.total_numbers << "\nmodel_numbers " << budget.model_numbers
      << "\nremaining_numbers " << budget.remaining << "\nbyte_limit " << budget.byte_limit
      << "\narchive_bytes " << file_bytes << "\n";
  out << "stored_real " << c0 << "\nstored_complex " << cp << "\nindex_bytes " << index_bytes << "\n";
  const double bits = a.indices.empty() ? 0.0 : 8.0 * static_cast<double>(index_bytes) / static_cast<double>(a.indices.size());
  out << "bits_per_index_pair " << bits << " (planning assumption " << budget.index_bits_per_pair << ")\n";
  out << "k stored kappa\n";
  for (std::size_t k = 0; k < counts.size(); ++k) out << k << ' ' << counts[k] << ' ' << a.kappa[k] << '\n';
  return kExitOk;
}

int do_synth(const Options& o, std::ostream& err) {
  GeneratorSpec spec;
  if (!o.spec.empty()) spec = load_generator_spec(o.spec);
  if (o.nlat) spec.n_lat = *o.nlat;
  if (o.nlon) spec.n_lon = *o.nlon;
  if (o.ntime) spec.T = *o.ntime;
  if (o.seed) spec.seed = *o.seed;
  if (o.poles) spec.poles = true;
  spec.validate();
  const TimeCube cube = generate(spec, o.threads);
  save_cube(cube.grid, cube, o.output);
  note(o, err, "generated " + std::to_string(cube.n()) + " pixels x " + std::to_string(cube.T) + " steps");
  return kExitOk;
}

int do_maps(const Options& o, std::ostream& err) {
  const auto [grid, cube] = load_cube(o.input);
  const SpectralField field = forward_dft_all(cube);
  const SmoothingKernel kernel = o.kernel == "exponential" ? SmoothingKernel::appendix_exponential(cube.T)
                                                            : SmoothingKernel::daniell(o.bandwidth, cube.T);
  const SummaryMaps maps = summary_maps(field, kernel);
  std::error_code ec;
  std::filesystem::create_directories(o.output, ec);
  if (ec) throw Error("cannot create " + o.output);
  const std::filesystem::path dir(o.output);
  write_floats((dir / "mean.map").string(), grid, maps.mean_map);
  write_floats((dir / "seasonal.map").string(), grid, maps.seasonal_map);
  write_floats((dir / "sigma_tilde.map").string(), grid, maps.sigma_tilde);
  std::vector<float> fsd(maps.norm_forecast_sd.size());
  for (std::size_t i = 0; i < fsd.size(); ++i)
    fsd[i] = maps.norm_forecast_sd[i] ? static_cast<float>(*maps.norm_forecast_sd[i]) : std::numeric_limits<float>::quiet_NaN();
  save_map(grid, fsd, dir / "norm_forecast_sd.map");
  note(o, err, "maps written to " + o.output);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Half-spectral compression and conditional emulation of gridded space-time fields", "halfspec"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", o.threads, "Worker threads (0: HALFSPEC_THREADS or hardware)");
  app.add_flag("-v,--verbose", o.verbosity, "Progress messages on standard error");

  auto* compress_cmd = app.add_subcommand("compress", "Compress a cube into an archive");
  compress_cmd->add_option("input", o.input, "Input cube")->required()->check(CLI::ExistingFile);
  compress_cmd->add_option("output", o.output, "Output archive")->required();
  compress_cmd->add_option("--ratio", o.ratio, "Compression ratio")->check(CLI::PositiveNumber);
  compress_cmd->add_option("--variant", o.variant, "sequential or distributed")
      ->check(CLI::IsMember({"sequential", "distributed"}));
  compress_cmd->add_option("--M", o.M, "Batch size")->check(CLI::PositiveNumber);
  compress_cmd->add_option("--J", o.J, "Number of kappa re-estimation stops");
  compress_cmd->add_option("--dmin", o.d_min, "Minimum chordal distance within a batch")->check(CLI::NonNegativeNumber);
  compress_cmd->add_option("--seed-lat-stride", o.seed_lat_stride, "Seed grid latitude stride")->check(CLI::PositiveNumber);
  compress_cmd->add_option("--seed-lon-stride", o.seed_lon_stride, "Seed grid longitude stride")->check(CLI::PositiveNumber);
  compress_cmd->add_flag("--dmin-across-batches", o.d_min_across, "Also enforce dmin against earlier batches");
  compress_cmd->add_option("--seed", o.seed, "Seed recorded in the archive");
  compress_cmd->add_option("--trace", o.trace, "Write the selection trace to this file");

  auto* decompress_cmd = app.add_subcommand("decompress", "Reconstruct a cube from an archive");
  decompress_cmd->add_option("input", o.input, "Input archive")->required()->check(CLI::ExistingFile);
  decompress_cmd->add_option("output", o.output, "Output cube")->required();
  decompress_cmd->add_option("--mode", o.mode, "mean or simulate")->check(CLI::IsMember({"mean", "simulate"}));
  decompress_cmd->add_option("--seed", o.seed, "Seed (required for simulate)");

  auto* emulate_cmd = app.add_subcommand("emulate", "Conditional simulations from an archive");
  emulate_cmd->add_option("input", o.input, "Input archive")->required()->check(CLI::ExistingFile);
  emulate_cmd->add_option("output", o.output, "Output prefix; writes <prefix>_NNNN.cube")->required();
  emulate_cmd->add_option("--count", o.count, "Number of realizations")->check(CLI::PositiveNumber);
  emulate_cmd->add_option("--seed", o.seed, "Master seed")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "RMSPE and contrast-variance report");
  evaluate_cmd->add_option("original", o.input, "Original cube")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("decompressed", o.output, "Decompressed cube")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("report", o.third, "Report directory")->required();
  evaluate_cmd->add_option("--archive", o.archive, "Take contrast maps from a conditional simulation of this archive")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--seed", o.seed, "Seed for the conditional simulation");

  auto* inspect_cmd = app.add_subcommand("inspect", "Print archive header, budget and stored counts");
  inspect_cmd->add_option("input", o.input, "Archive")->required()->check(CLI::ExistingFile);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cube");
  synth_cmd->add_option("output", o.output, "Output cube")->required();
  synth_cmd->add_option("--nlat", o.nlat, "Latitude rows")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--nlon", o.nlon, "Longitude columns")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--ntime", o.ntime, "Time steps")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", o.seed, "Master seed");
  synth_cmd->add_option("--spec", o.spec, "Generator spec file")->check(CLI::ExistingFile);
  synth_cmd->add_flag("--poles", o.poles, "Include pole rows");

  auto* maps_cmd = app.add_subcommand("maps", "Exploratory summary maps of a cube");
  maps_cmd->add_option("input", o.input, "Input cube")->required()->check(CLI::ExistingFile);
  maps_cmd->add_option("output", o.output, "Output directory")->required();
  maps_cmd->add_option("--kernel", o.kernel, "daniell or exponential")->check(CLI::IsMember({"daniell", "exponential"}));
  maps_cmd->add_option("--bandwidth", o.bandwidth, "Daniell bandwidth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (compress_cmd->parsed()) return do_compress(o, err);
    if (decompress_cmd->parsed()) return do_decompress(o, err);
    if (emulate_cmd->parsed()) return do_emulate(o, err);
    if (evaluate_cmd->parsed()) return do_evaluate(o, err);
    if (inspect_cmd->parsed()) return do_inspect(o, out);
    if (synth_cmd->parsed()) return do_synth(o, err);
    if (maps_cmd->parsed()) return do_maps(o, err);
  } catch (const InvalidInput& e) {
    err << "halfspec: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BudgetError& e) {
    err << "halfspec: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "halfspec: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace halfspec::cli
