// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "kprune/io.hpp"
#include "kprune/runner.hpp"

namespace kprune {

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void write_spectrum_csv(std::ostream& out, const std::vector<SpectrumRow>& rows) {
  out << "re_lambda,im_lambda,norm,kgp\n";
  for (const SpectrumRow& r : rows) {
    out << format_double(r.re_lambda) << ',' << format_double(r.im_lambda) << ','
        << format_double(r.norm) << ',' << (r.kgp ? "true" : "false") << '\n';
  }
}

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "seed,epoch,strategy,c,status,kept,acc_unpruned,acc_pruned,loss_pruned,acc_refined,"
         "loss_refined,paper_strategy\n";
  for (const RunRecord& r : records) {
    out << r.seed << ',' << r.epoch << ',' << to_string(r.strategy) << ','
        << format_double(r.compression) << ',' << r.status << ',';
    if (r.ok()) {
      out << r.kept << ',' << format_double(r.accuracy_unpruned) << ','
          << format_double(r.accuracy_pruned) << ',' << format_double(r.loss_pruned) << ','
          << opt(r.accuracy_refined) << ',' << opt(r.loss_refined);
    } else {
      out << ",," << ",,,";
    }
    out << ',' << (is_paper_strategy(r.strategy) ? "true" : "false") << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "epoch,strategy,c,n,mean_pruned,std_pruned,min_pruned,max_pruned,n_refined,"
         "mean_refined,std_refined,min_refined,max_refined\n";
  for (const SummaryRow& r : rows) {
    out << r.epoch << ',' << to_string(r.strategy) << ',' << format_double(r.compression) << ','
        << r.n << ',' << format_double(r.mean_pruned) << ',' << format_double(r.std_pruned) << ','
        << format_double(r.min_pruned) << ',' << format_double(r.max_pruned) << ','
        << r.n_refined << ',' << format_double(r.mean_refined) << ','
        << format_double(r.std_refined) << ',' << format_double(r.min_refined) << ','
        << format_double(r.max_refined) << '\n';
  }
}

void write_overlap_csv(std::ostream& out, const std::vector<OverlapRow>& rows) {
  out << "strategy_a,epoch_a,strategy_b,epoch_b,c,n,mean,std,min,max,status\n";
  for (const OverlapRow& r : rows) {
    out << to_string(r.pairing.a.strategy) << ',' << r.pairing.a.epoch << ','
        << to_string(r.pairing.b.strategy) << ',' << r.pairing.b.epoch << ','
        << format_double(r.compression) << ',' << r.n << ',' << format_double(r.mean) << ','
        << format_double(r.std) << ',' << format_double(r.min) << ',' << format_double(r.max)
        << ',' << r.status << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const std::vector<EpochDiagnostics>& diags) {
  out << "seed,epoch,status,tau,rank,consistency_residual,amplitude_residual,unit_modes,"
         "fixed_point_imag,fixed_point_distance,decaying_modes,train_loss,accuracy\n";
  for (const EpochDiagnostics& d : diags) {
    out << d.seed << ',' << d.epoch << ',' << d.status << ',' << d.tau << ',' << d.rank << ','
        << format_double(d.consistency_residual) << ',' << format_double(d.amplitude_residual)
        << ',' << d.unit_modes << ',' << format_double(d.fixed_point_imag) << ','
        << format_double(d.fixed_point_distance) << ',' << d.decaying_modes << ','
        << format_double(d.train_loss) << ',' << format_double(d.accuracy) << '\n';
  }
}

void write_accuracy_svg(std::ostream& out, const std::vector<SummaryRow>& rows, std::size_t epoch) {
  constexpr double W = 640, H = 420, L = 60, R = 150, T = 30, B = 50;
  std::map<Strategy, std::vector<const SummaryRow*>> series;
  double cmax = 1.0;
  for (const SummaryRow& r : rows) {
    if (r.epoch != epoch || r.n == 0) continue;
    series[r.strategy].push_back(&r);
    cmax = std::max(cmax, r.compression);
  }
  const double xspan = std::max(1.0, std::log2(cmax));
  const auto x = [&](double c) { return L + (W - L - R) * std::log2(c) / xspan; };
  const auto y = [&](double acc) { return T + (H - T - B) * (1.0 - acc); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << L << "\" y=\"18\" font-size=\"13\">epoch " << epoch
      << ": compression vs accuracy (dashed: pruned, solid: refined)</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << W - R << "\" y2=\"" << y(0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << L << "\" y2=\"" << y(1)
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double a = i / 4.0;
    out << "<text x=\"" << L - 35 << "\" y=\"" << y(a) + 4 << "\">" << format_double(a) << "</text>\n";
  }
  for (double c = 1; c <= cmax; c *= 2) {
    out << "<text x=\"" << x(c) - 5 << "\" y=\"" << H - B + 18 << "\">" << format_double(c)
        << "</text>\n";
  }
  out << "<text x=\"" << (W - R + L) / 2 - 30 << "\" y=\"" << H - 12 << "\">compression c</text>\n";

  std::size_t color = 0;
  for (const auto& [strategy, pts] : series) {
    const char* col = kPalette[color++ % std::size(kPalette)];
    for (int refined = 0; refined < 2; ++refined) {
      out << "<polyline fill=\"none\" stroke=\"" << col << "\""
          << (refined ? "" : " stroke-dasharray=\"4,3\"") << " points=\"";
      for (const SummaryRow* p : pts) {
        const double acc = refined ? p->mean_refined : p->mean_pruned;
        if (std::isnan(acc)) continue;
        out << format_double(x(p->compression)) << ',' << format_double(y(acc)) << ' ';
      }
      out << "\"/>\n";
    }
    const double ly = T + 18.0 * static_cast<double>(color);
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << col << "\"/>\n";
    out << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << to_string(strategy)
        << "</text>\n";
  }
  out << "</svg>\n";
}

void write_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "records.csv");
    write_records_csv(out, result.records);
  }
  const std::vector<SummaryRow> summary = summarize(result.records);
  {
    auto out = open_out(out_dir / "summary.csv");
    write_summary_csv(out, summary);
  }
  const std::vector<OverlapRow> overlaps = overlap_table(result.masks, default_pairings(config));
  {
    auto out = open_out(out_dir / "overlap.csv");
    write_overlap_csv(out, overlaps);
  }
  {
    auto out = open_out(out_dir / "overlap_trend.csv");
    out << "strategy,c,spearman\n";
    std::set<double> cs(config.compressions.begin(), config.compressions.end());
    for (double c : cs) {
      out << "kmp," << format_double(c) << ',' << format_double(overlap_trend(overlaps, c)) << '\n';
    }
  }
  {
    auto out = open_out(out_dir / "diagnostics.csv");
    write_diagnostics_csv(out, result.diagnostics);
  }
  std::set<std::size_t> epochs;
  for (const EpochDiagnostics& d : result.diagnostics) {
    epochs.insert(d.epoch);
    if (d.spectrum.empty()) continue;
    auto out = open_out(out_dir / ("spectrum_s" + std::to_string(d.seed) + "_e" +
                                   std::to_string(d.epoch) + ".csv"));
    write_spectrum_csv(out, d.spectrum);
  }
  for (std::size_t e : epochs) {
    auto out = open_out(out_dir / ("accuracy_e" + std::to_string(e) + ".svg"));
    write_accuracy_svg(out, summary, e);
  }
  {
    auto out = open_out(out_dir / "config.txt");
    out << config_text(config);
  }
  if (config.write_masks) {
    const auto dir = out_dir / "masks";
    std::filesystem::create_directories(dir);
    for (const auto& [key, mask] : result.masks) {
      save_mask((dir / (std::string(to_string(key.strategy)) + "_s" + std::to_string(key.seed) +
                        "_e" + std::to_string(key.epoch) + "_c" + format_double(key.compression) +
                        ".mask"))
                    .string(),
                mask);
    }
  }
}

}  // namespace kprune
