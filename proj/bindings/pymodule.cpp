#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "beetag/decoder.hpp"
#include "beetag/detstore.hpp"
#include "beetag/evalharness.hpp"
#include "beetag/imgproc.hpp"
#include "beetag/localizer.hpp"
#include "beetag/synthgen.hpp"
#include "beetag/tagcodec.hpp"
#include "beetag/tracker.hpp"

namespace py = pybind11;
using namespace beetag;

namespace {

py::array_t<float> to_np(const GrayImage& img) {
  py::array_t<float> a({img.h, img.w});
  std::memcpy(a.mutable_data(), img.v.data(), img.v.size() * sizeof(float));
  return a;
}

GrayImage from_np(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d float array");
  GrayImage img(int(a.shape(0)), int(a.shape(1)));
  std::memcpy(img.v.data(), a.data(), img.v.size() * sizeof(float));
  return img;
}

std::array<float, 12> to_probs(const std::vector<double>& p) {
  if (p.size() != 12) throw std::invalid_argument("expected 12 bit probabilities");
  std::array<float, 12> out;
  for (int i = 0; i < 12; ++i) out[i] = float(p[i]);
  return out;
}

py::dict label_to_dict(const TagLabel& l) {
  py::dict d;
  d["id"] = l.id.value;
  std::vector<int> bits(l.bits.begin(), l.bits.end());
  d["bits"] = bits;
  d["z_rot"] = l.pose.z_rot;
  d["y_rot"] = l.pose.y_rot;
  d["x_rot"] = l.pose.x_rot;
  d["center_x"] = l.pose.center_x;
  d["center_y"] = l.pose.center_y;
  return d;
}

TagPose pose_from_kwargs(double z, double y, double x, double cx, double cy) {
  TagPose p;
  p.z_rot = z;
  p.y_rot = y;
  p.x_rot = x;
  p.center_x = cx;
  p.center_y = cy;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ring-marker pipeline core operations";

  // codec
  m.def("encode_id", [](int id) {
    BitVector b = encode_id(TagId{id});
    return std::vector<int>(b.begin(), b.end());
  });
  m.def("decode_bits", [](const std::vector<double>& probs) {
    if (probs.size() != 12) throw std::invalid_argument("expected 12 bit probabilities");
    std::array<double, 12> a;
    std::copy(probs.begin(), probs.end(), a.begin());
    auto [id, margin] = decode_bits(a);
    return py::make_tuple(id.value, margin);
  });
  m.def("confidence",
        [](const std::vector<double>& probs) { return confidence(to_probs(probs)); });
  m.def("wrap_angle", &wrap_angle);

  // rasterizer and synthetic data
  m.def(
      "rasterize_tag",
      [](int id, double z_rot, double y_rot, double x_rot, double cx, double cy,
         int patch_size) {
        return to_np(rasterize_tag(encode_id(TagId{id}),
                                   pose_from_kwargs(z_rot, y_rot, x_rot, cx, cy), TagGeometry{},
                                   patch_size));
      },
      py::arg("id"), py::arg("z_rot") = 0.0, py::arg("y_rot") = 0.0, py::arg("x_rot") = 0.0,
      py::arg("center_x") = 32.0, py::arg("center_y") = 32.0, py::arg("patch_size") = 64);
  m.def(
      "generate_patch",
      [](uint64_t seed, const std::string& preset) {
        auto [img, label] = generate_patch(seed, preset_from_name(preset));
        return py::make_tuple(to_np(img), label_to_dict(label));
      },
      py::arg("seed"), py::arg("preset") = "moderate");
  m.def(
      "generate_frame",
      [](uint64_t seed, int n_tags, int h, int w, const std::string& preset) {
        FrameScene s = generate_frame(seed, n_tags, h, w, preset_from_name(preset));
        py::list labels;
        for (const auto& l : s.labels) labels.append(label_to_dict(l));
        return py::make_tuple(to_np(s.image), labels);
      },
      py::arg("seed"), py::arg("n_tags") = 10, py::arg("height") = 512, py::arg("width") = 512,
      py::arg("preset") = "moderate");

  // image kernels
  m.def(
      "clahe",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a, int tiles_r,
         int tiles_c, double clip) { return to_np(clahe(from_np(a), tiles_r, tiles_c, clip)); },
      py::arg("image"), py::arg("tile_rows") = 8, py::arg("tile_cols") = 8,
      py::arg("clip_limit") = 2.0);
  m.def("downsample4",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
          return to_np(downsample4(from_np(a)));
        });
  m.def("gaussian_blur",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
           double sigma) { return to_np(gaussian_blur(from_np(a), sigma)); });
  m.def("max_filter",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a, int radius) {
          return to_np(max_filter(from_np(a), radius));
        });
  m.def("morph_open",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a, int radius) {
          return to_np(morph_open(from_np(a), radius));
        });
  m.def("morph_close",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a, int radius) {
          return to_np(morph_close(from_np(a), radius));
        });

  // localizer targets
  m.def(
      "make_target",
      [](double cx, double cy, const std::vector<std::pair<double, double>>& centers,
         double sigma) {
        std::vector<TagLabel> labels;
        for (auto [x, y] : centers) {
          TagLabel l;
          l.pose.center_x = x;
          l.pose.center_y = y;
          labels.push_back(l);
        }
        return make_target(cx, cy, labels, sigma);
      },
      py::arg("center_x"), py::arg("center_y"), py::arg("tag_centers"), py::arg("sigma") = 32.0);

  // detection storage
  m.def("quantize_prob", [](double p) { return int(quantize_prob(p)); });
  m.def("dequantize_prob", [](int q) {
    if (q < 0 || q > 255) throw std::invalid_argument("quantized value outside [0,255]");
    return double(dequantize_prob(uint8_t(q)));
  });
  m.def("shard_path", &shard_path, py::arg("year"), py::arg("month"), py::arg("day"),
        py::arg("camera_id"), py::arg("shard_index"));
  m.def("write_shard", [](int camera_id, const py::list& frames, const std::string& path) {
    Shard s;
    s.camera_id = uint8_t(camera_id);
    for (const auto& fobj : frames) {
      py::dict f = fobj.cast<py::dict>();
      FrameBlock b;
      b.frame_id = f["frame_id"].cast<uint64_t>();
      b.timestamp_us = f["timestamp_us"].cast<uint64_t>();
      for (const auto& dobj : f["dets"].cast<py::list>()) {
        py::dict dd = dobj.cast<py::dict>();
        DetectionRecord r;
        r.x = dd["x"].cast<float>();
        r.y = dd["y"].cast<float>();
        r.z_rot = dd["z_rot"].cast<float>();
        r.y_rot = dd["y_rot"].cast<float>();
        r.x_rot = dd["x_rot"].cast<float>();
        auto probs = dd["bit_probs"].cast<std::vector<double>>();
        if (probs.size() != 12) throw std::invalid_argument("expected 12 bit probabilities");
        for (int i = 0; i < 12; ++i) r.bit_q[i] = quantize_prob(probs[i]);
        r.saliency = dd["saliency"].cast<float>();
        b.dets.push_back(r);
      }
      s.frames.push_back(std::move(b));
    }
    write_shard(s, path);
  });
  m.def("read_shard", [](const std::string& path) {
    Shard s = read_shard(path);
    py::dict out;
    out["camera_id"] = int(s.camera_id);
    py::list frames;
    for (const auto& b : s.frames) {
      py::dict f;
      f["frame_id"] = b.frame_id;
      f["timestamp_us"] = b.timestamp_us;
      py::list dets;
      for (const auto& d : b.dets) {
        py::dict dd;
        dd["x"] = d.x;
        dd["y"] = d.y;
        dd["z_rot"] = d.z_rot;
        dd["y_rot"] = d.y_rot;
        dd["x_rot"] = d.x_rot;
        std::vector<double> probs(12);
        for (int i = 0; i < 12; ++i) probs[i] = dequantize_prob(d.bit_q[i]);
        dd["bit_probs"] = probs;
        dd["saliency"] = d.saliency;
        dets.append(dd);
      }
      f["dets"] = dets;
      frames.append(f);
    }
    out["frames"] = frames;
    return out;
  });

  // evaluation
  m.def(
      "match_detections",
      [](const std::vector<std::pair<double, double>>& gt,
         const std::vector<std::pair<double, double>>& det, double d_match) {
        std::vector<TagLabel> labels;
        for (auto [x, y] : gt) {
          TagLabel l;
          l.pose.center_x = x;
          l.pose.center_y = y;
          labels.push_back(l);
        }
        std::vector<Candidate> cands;
        for (auto [x, y] : det) cands.push_back({x, y, 1.0});
        auto r = match_detections(labels, cands, d_match);
        py::dict out;
        out["matches"] = r.matches;
        out["misses"] = r.misses;
        out["false_positives"] = r.false_positives;
        return out;
      },
      py::arg("gt_centers"), py::arg("det_centers"), py::arg("d_match") = 11.0);
  m.def("score_decoding",
        [](const std::vector<std::pair<std::vector<int>, std::vector<double>>>& raw) {
          std::vector<std::pair<BitVector, std::array<float, 12>>> pairs;
          for (const auto& [bits, probs] : raw) {
            if (bits.size() != 12 || probs.size() != 12)
              throw std::invalid_argument("expected 12 bits and 12 probabilities");
            BitVector b;
            for (int i = 0; i < 12; ++i) b[i] = uint8_t(bits[i]);
            std::vector<double> pv(probs.begin(), probs.end());
            pairs.push_back({b, to_probs(pv)});
          }
          auto [mhd, acc] = score_decoding(pairs);
          return py::make_tuple(mhd, acc);
        });
}
