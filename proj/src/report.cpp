#include <fstream>
#include <iomanip>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sia/errors.hpp"
#include "sia/explain.hpp"

namespace sia {

namespace {

std::string fmt2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

// Tile image with a caption strip and the similarity score burned in.
void write_panel(const Image& img, const std::string& caption,
                 const std::filesystem::path& file) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    std::copy(img.data.begin(), img.data.end(), m.data);
    cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
    const int strip = 18;
    cv::Mat panel(img.height + strip, img.width, CV_8UC3, cv::Scalar(30, 30, 30));
    m.copyTo(panel(cv::Rect(0, 0, img.width, img.height)));
    cv::putText(panel, caption, cv::Point(3, img.height + strip - 5), cv::FONT_HERSHEY_SIMPLEX,
                0.38, cv::Scalar(255, 255, 255), 1, cv::LINE_AA);
    if (!cv::imwrite(file.string(), panel))
        throw ValidationError("cannot write report panel: " + file.string());
}

std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void render_report(const std::vector<ExplanationRecord>& explanations,
                   const XaiMetricsReport& metrics, const DatasetManifest& tiles,
                   const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ostringstream html;
    html << "<!doctype html><html><head><meta charset=\"utf-8\">"
         << "<title>Explanation report</title><style>"
         << "body{font-family:sans-serif;background:#111;color:#eee;margin:20px}"
         << "table{border-collapse:collapse}td{padding:6px;vertical-align:top}"
         << "img{image-rendering:pixelated}figure{margin:0}figcaption{font-size:12px}"
         << ".metrics{color:#9c9}.wrong{color:#c66}"
         << "</style></head><body>\n";
    html << "<h1>Case-based explanations</h1>\n<p class=\"metrics\">"
         << "C_cor = " << fmt2(metrics.c_cor) << " &nbsp; C_cty = " << fmt2(metrics.c_cty)
         << " &nbsp; C_cst = " << (metrics.c_cst ? fmt2(*metrics.c_cst) : std::string("-"))
         << " &nbsp; (K = " << metrics.k << ", N = " << metrics.n_samples << ")</p>\n";

    html << "<table>\n";
    for (std::size_t n = 0; n < explanations.size(); ++n) {
        const auto& ex = explanations[n];
        const Tile* query = tiles.find(ex.query_id);
        if (!query)
            throw ValidationError("render_report: cannot resolve query tile " + ex.query_id);

        std::string qfile = "panel_" + std::to_string(n) + "_query.png";
        write_panel(query->pixels, "query: " + ex.true_class, out_dir / qfile);

        bool correct = ex.predicted_class == ex.true_class;
        html << "<tr><td><figure><img src=\"" << qfile << "\"><figcaption>"
             << html_escape(ex.query_id) << "<br>pred: <span class=\""
             << (correct ? "metrics" : "wrong") << "\">" << html_escape(ex.predicted_class)
             << "</span></figcaption></figure></td>\n";
        for (std::size_t i = 0; i < ex.selected.size(); ++i) {
            const auto& sel = ex.selected[i];
            const Tile* sup = tiles.find(sel.support_id);
            if (!sup)
                throw ValidationError("render_report: cannot resolve support tile " +
                                      sel.support_id);
            std::string sfile = "panel_" + std::to_string(n) + "_s" + std::to_string(i) + ".png";
            write_panel(sup->pixels, "sim " + fmt2(sel.score), out_dir / sfile);
            html << "<td><figure><img src=\"" << sfile << "\"><figcaption>"
                 << html_escape(sel.support_class) << " (sim " << fmt2(sel.score)
                 << ")</figcaption></figure></td>\n";
        }
        html << "<td class=\"metrics\">cor " << fmt2(metrics.per_sample_cor.at(n)) << "<br>cty "
             << fmt2(metrics.per_sample_cty.at(n));
        if (!metrics.per_sample_cst.empty())
            html << "<br>cst " << fmt2(metrics.per_sample_cst.at(n));
        html << "</td></tr>\n";
    }
    html << "</table>\n</body></html>\n";

    std::ofstream out(out_dir / "index.html");
    if (!out) throw ValidationError("cannot write report: " + (out_dir / "index.html").string());
    out << html.str();
}

}  // namespace sia
