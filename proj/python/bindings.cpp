#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "swinhaze/checkpoint.hpp"
#include "swinhaze/cli.hpp"
#include "swinhaze/dataset.hpp"
#include "swinhaze/error.hpp"
#include "swinhaze/guided_filter.hpp"
#include "swinhaze/imaging.hpp"
#include "swinhaze/losses.hpp"
#include "swinhaze/metrics.hpp"
#include "swinhaze/pipeline.hpp"
#include "swinhaze/watershed.hpp"

namespace py = pybind11;
using namespace swinhaze;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) float array -> unit-range image.
ImageBuffer to_image(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
    const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    return ImageBuffer(h, w, c, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const ImageBuffer& img, bool squeeze = true) {
    std::vector<py::ssize_t> shape{img.height(), img.width()};
    if (!(squeeze && img.channels() == 1)) shape.push_back(img.channels());
    Array out(shape);
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

py::dict report(const losses::LossReport& r) {
    py::dict d;
    d["l2"] = r.l2;
    d["guided"] = r.guided;
    d["water"] = r.water;
    d["total"] = r.total;
    return d;
}

}  // namespace

PYBIND11_MODULE(_swinhaze, m) {
    m.doc() = "Satellite image dehazing core (C++)";

    static py::exception<Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            error((std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    m.def("load_image", [](const std::filesystem::path& p) { return to_array(imaging::load_image(p), false); });
    m.def("save_image", [](const Array& a, const std::filesystem::path& p) { imaging::save_image(to_image(a), p); });
    m.def("resize", [](const Array& a, int h, int w) { return to_array(imaging::resize_bilinear(to_image(a), h, w)); });
    m.def(
        "guided_filter",
        [](const Array& guide, const Array& ref, int radius, double eps, bool smooth) {
            return to_array(guided::guided_filter(to_image(guide), to_image(ref), radius, eps, smooth));
        },
        py::arg("guide"), py::arg("reference"), py::arg("radius"), py::arg("eps") = 1e-4,
        py::arg("coef_smoothing") = false);
    m.def(
        "watershed_map",
        [](const Array& img, double sigma) {
            watershed::WatershedConfig cfg;
            cfg.sigma = sigma;
            return to_array(watershed::watershed_map(to_image(img), cfg).to_image());
        },
        py::arg("image"), py::arg("sigma") = 2.0);
    m.def(
        "canny",
        [](const Array& img, double lo, double hi, double sigma) {
            const EdgeMap e = imaging::canny_edges(to_image(img), {lo, hi, sigma});
            py::array_t<std::uint8_t> out({e.height, e.width});
            std::copy(e.data.begin(), e.data.end(), out.mutable_data());
            return out;
        },
        py::arg("image"), py::arg("low") = 100.0, py::arg("high") = 200.0, py::arg("sigma") = 1.4);

    m.def(
        "loss_report",
        [](const Array& pred, const Array& gt, double l2, double guided_w, double water, int radius, double eps) {
            losses::LossConfig cfg;
            cfg.weights = {l2, guided_w, water};
            cfg.guided_radius = radius;
            cfg.guided_eps = eps;
            return report(losses::total_loss(to_image(pred), to_image(gt), cfg).report);
        },
        py::arg("pred"), py::arg("gt"), py::arg("lambda_l2") = 5.0, py::arg("lambda_guided") = 1.0,
        py::arg("lambda_water") = 0.5, py::arg("guided_radius") = 0, py::arg("guided_eps") = 1e-4);
    m.def("l2_loss_grad", [](const Array& pred, const Array& gt) {
        const auto p = to_image(pred);
        const auto t = losses::l2_loss(p, to_image(gt));
        return py::make_tuple(t.value, to_array(ImageBuffer(p.height(), p.width(), p.channels(), t.grad.data)));
    });
    m.def(
        "guided_loss_grad",
        [](const Array& pred, const Array& gt, int radius, double eps) {
            const auto p = to_image(pred);
            const auto t = losses::guided_loss(p, to_image(gt), radius, eps);
            return py::make_tuple(t.value, to_array(ImageBuffer(p.height(), p.width(), p.channels(), t.grad.data)));
        },
        py::arg("pred"), py::arg("gt"), py::arg("radius") = 1, py::arg("eps") = 1e-4);

    m.def("psnr", [](const Array& a, const Array& b) { return metrics::psnr(to_image(a), to_image(b)); });
    m.def("ssim", [](const Array& a, const Array& b) { return metrics::ssim(to_image(a), to_image(b)); });
    m.def("uqi", [](const Array& a, const Array& b) { return metrics::uqi(to_image(a), to_image(b)); });

    m.def(
        "synthetic_pair",
        [](int size, std::uint64_t seed) {
            const auto s = pipeline::synthetic_pair(size, size, seed);
            return py::make_tuple(to_array(s.hazy), to_array(s.clear));
        },
        py::arg("size") = 64, py::arg("seed") = 1);

    m.def(
        "dehaze",
        [](const std::filesystem::path& checkpoint, const Array& hazy) {
            const auto ck = network::load_checkpoint(checkpoint);
            return to_array(pipeline::dehaze(to_image(hazy), ck.params, ck.config), false);
        },
        py::arg("checkpoint"), py::arg("hazy"));

    // Same entry point as the executable; returns (exit code, stdout, stderr).
    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "swinhaze");
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    });
}
