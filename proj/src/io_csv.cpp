#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ctsplat/io.hpp"

namespace ctsplat {

namespace {

// Fixed formatting keeps report bytes reproducible; infinities (identical
// images) serialize as the token "inf".
void format_metric(char* buf, std::size_t n, double v) {
    if (std::isinf(v)) {
        std::snprintf(buf, n, v > 0 ? "inf" : "-inf");
    } else {
        std::snprintf(buf, n, "%.9g", v);
    }
}

}  // namespace

TrainLogWriter::TrainLogWriter(const std::filesystem::path& path)
    : file_(std::fopen(path.string().c_str(), "wb")) {
    if (!file_) throw std::runtime_error("cannot open training log: " + path.string());
    std::fputs("iteration,l1,dssim,tv,beta,total,n_gaussians,ms_per_iter\n", file_);
}

TrainLogWriter::~TrainLogWriter() {
    if (file_) std::fclose(file_);
}

void TrainLogWriter::append(const TrainLogRow& row) {
    std::fprintf(file_, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%zu,%.3f\n", row.iteration, row.l1,
                 row.dssim, row.tv, row.beta, row.total, row.n_gaussians, row.ms_per_iter);
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open report: " + path.string());
    char psnr_buf[40], ssim_buf[40];
    std::fputs("angle_deg,psnr_db,ssim\n", f);
    for (const EvalRow& row : report.rows) {
        format_metric(psnr_buf, sizeof psnr_buf, row.psnr_db);
        format_metric(ssim_buf, sizeof ssim_buf, row.ssim);
        std::fprintf(f, "%.9g,%s,%s\n", row.angle_deg, psnr_buf, ssim_buf);
    }
    format_metric(psnr_buf, sizeof psnr_buf, report.psnr_mean);
    format_metric(ssim_buf, sizeof ssim_buf, report.ssim_mean);
    std::fprintf(f, "mean,%s,%s\n", psnr_buf, ssim_buf);
    format_metric(psnr_buf, sizeof psnr_buf, report.psnr_stddev);
    format_metric(ssim_buf, sizeof ssim_buf, report.ssim_stddev);
    std::fprintf(f, "stddev,%s,%s\n", psnr_buf, ssim_buf);
    std::fprintf(f, "train_fraction,%.9g,\n", report.train_fraction);
    std::fprintf(f, "n_gaussians,%zu,\n", report.n_gaussians);
    std::fprintf(f, "model_bytes,%llu,\n",
                 static_cast<unsigned long long>(report.model_bytes));
    std::fprintf(f, "voxel_bytes,%llu,\n",
                 static_cast<unsigned long long>(report.voxel_bytes));
    if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path.string());
}

void print_eval_report(const EvalReport& report, std::ostream& out) {
    char buf[160];
    out << "  angle_deg     psnr_db      ssim\n";
    for (const EvalRow& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%11.2f %11.3f %9.5f\n", row.angle_deg, row.psnr_db,
                      row.ssim);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "PSNR %.3f +/- %.3f dB, SSIM %.5f +/- %.5f over %zu views\n",
                  report.psnr_mean, report.psnr_stddev, report.ssim_mean, report.ssim_stddev,
                  report.rows.size());
    out << buf;
    std::snprintf(buf, sizeof buf, "gaussians %zu, model %llu bytes", report.n_gaussians,
                  static_cast<unsigned long long>(report.model_bytes));
    out << buf;
    if (report.voxel_bytes > 0) {
        std::snprintf(buf, sizeof buf, ", dense voxel grid %llu bytes (ratio %.4f)",
                      static_cast<unsigned long long>(report.voxel_bytes),
                      static_cast<double>(report.model_bytes) /
                          static_cast<double>(report.voxel_bytes));
        out << buf;
    }
    out << "\n";
}

}  // namespace ctsplat
