#include <doctest.h>

#include "dynavessel/dynavessel.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

extern "C" int dv_capi_header_is_c(void);

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  dv_string_free(s);
  return out;
}

std::filesystem::path scratch() {
  const auto p = std::filesystem::temp_directory_path() / ("dvtest_capi_" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("C header compiles as C") { CHECK(dv_capi_header_is_c() == 1); }

TEST_CASE("status names and errors") {
  CHECK(std::string(dv_status_name(DV_ERR_GEOMETRY)) == "geometry");
  CHECK(std::string(dv_status_name(DV_ERR_EMPTY_REFERENCE)) == "empty_reference");
  dv_volume* v = nullptr;
  CHECK(dv_volume_read("/nonexistent/x.nii", &v) == DV_ERR_IO);
  CHECK(v == nullptr);
  CHECK(std::strlen(dv_last_error()) > 0);
  CHECK(dv_volume_read(nullptr, &v) == DV_ERR_ARGUMENT);
  CHECK(std::string(dv_version()).size() > 0);
}

TEST_CASE("volume handles round trip through files") {
  const auto dir = scratch();
  const int dims[3] = {4, 3, 2};
  const double spacing[3] = {0.5, 1.0, 2.0};
  const double origin[3] = {1, 2, 3};
  std::vector<float> data(24);
  for (int i = 0; i < 24; ++i) data[i] = i * 10.0f - 50.0f;
  dv_volume* v = nullptr;
  REQUIRE(dv_volume_create(dims, spacing, origin, data.data(), &v) == DV_OK);
  const std::string path = (dir / "v.nii.gz").string();
  REQUIRE(dv_volume_write(v, path.c_str()) == DV_OK);
  dv_volume* r = nullptr;
  REQUIRE(dv_volume_read(path.c_str(), &r) == DV_OK);
  int d2[3];
  double s2[3], o2[3];
  REQUIRE(dv_volume_geometry(r, d2, s2, o2) == DV_OK);
  CHECK(d2[0] == 4);
  CHECK(s2[2] == doctest::Approx(2.0));
  CHECK(std::memcmp(dv_volume_data(r), data.data(), 24 * sizeof(float)) == 0);
  char *h1 = nullptr, *h2 = nullptr;
  REQUIRE(dv_volume_digest(v, &h1) == DV_OK);
  REQUIRE(dv_volume_digest(r, &h2) == DV_OK);
  CHECK(take(h1) == take(h2));
  char* fh = nullptr;
  REQUIRE(dv_file_digest(path.c_str(), &fh) == DV_OK);
  CHECK(take(fh).size() == 64);

  dv_labels* m = nullptr;
  REQUIRE(dv_threshold_above(v, 100.0f, &m) == DV_OK);
  const unsigned char* md = dv_labels_data(m);
  int on = 0;
  for (int i = 0; i < 24; ++i) on += md[i];
  CHECK(on == 8);
  size_t count = 0;
  REQUIRE(dv_connected_components(m, 26, &count) == DV_OK);
  CHECK(count == 1);
  char* text = nullptr;
  REQUIRE(dv_labels_to_text(m, &text) == DV_OK);
  CHECK(take(text).find("3 2 1") != std::string::npos);
  CHECK(dv_connected_components(m, 7, &count) == DV_ERR_ARGUMENT);

  dv_labels_free(m);
  dv_volume_free(v);
  dv_volume_free(r);
}

TEST_CASE("transforms and registration through the C API") {
  const char* json = R"({"type":"rigid","angles":[0,0,0],"translation":[1,0,0],"center":[0,0,0]})";
  dv_transform* t = nullptr;
  REQUIRE(dv_transform_from_json(json, &t) == DV_OK);
  char* back = nullptr;
  REQUIRE(dv_transform_to_json(t, &back) == DV_OK);
  CHECK(take(back).find("rigid") != std::string::npos);
  dv_transform_free(t);
  CHECK(dv_transform_from_json("{", &t) != DV_OK);

  const int dims[3] = {24, 24, 24};
  const double sp[3] = {1, 1, 1}, org[3] = {-11.5, -11.5, -11.5};
  std::vector<float> blob(24 * 24 * 24, -1000.0f);
  for (int k = 0; k < 24; ++k)
    for (int j = 0; j < 24; ++j)
      for (int i = 0; i < 24; ++i) {
        const double x = i - 11.5, y = j - 11.5, z = k - 11.5;
        if (x * x / 64 + y * y / 36 + z * z / 25 <= 1) blob[(k * 24 + j) * 24 + i] = 100.0f + 10.0f * i;
      }
  dv_volume* v = nullptr;
  REQUIRE(dv_volume_create(dims, sp, org, blob.data(), &v) == DV_OK);
  dv_transform* reg = nullptr;
  double ncc = 0;
  REQUIRE(dv_register(v, v, "rigid", &reg, &ncc) == DV_OK);
  CHECK(ncc > 0.999);
  dv_volume* same = nullptr;
  REQUIRE(dv_resample_with_transform(v, reg, v, -1024.0f, &same) == DV_OK);
  double r = 0;
  REQUIRE(dv_ncc(v, same, nullptr, &r) == DV_OK);
  CHECK(r > 0.999);
  CHECK(dv_register(v, v, "elastic", &reg, &ncc) == DV_ERR_ARGUMENT);
  dv_transform_free(reg);
  dv_volume_free(same);
  dv_volume_free(v);
}

TEST_CASE("evaluate through the C API") {
  const int dims[3] = {12, 12, 12};
  const double sp[3] = {1, 1, 1}, org[3] = {0, 0, 0};
  std::vector<unsigned char> gt(12 * 12 * 12, 0);
  for (int i = 2; i < 10; ++i) {
    gt[(5 * 12 + 5) * 12 + i] = 1;
    gt[(8 * 12 + 8) * 12 + i] = 2;
  }
  dv_labels* g = nullptr;
  REQUIRE(dv_labels_create(dims, sp, org, gt.data(), &g) == DV_OK);
  char *report = nullptr, *csv = nullptr;
  REQUIRE(dv_evaluate(g, g, R"({"1":1,"2":2})", nullptr, "self", &report, &csv) == DV_OK);
  const std::string rj = take(report);
  CHECK(rj.find("\"mdc\": 1.0") != std::string::npos);
  const std::string table = take(csv);
  CAPTURE(table);
  CHECK(table.find("self,artery,1,1,0,8,unknown") != std::string::npos);
  CHECK(dv_evaluate(g, g, R"({"1":1})", nullptr, "x", &report, nullptr) == DV_ERR_CONFIG);
  dv_labels_free(g);
}

TEST_CASE("thread cap does not change results") {
  const int dims[3] = {20, 20, 20};
  const double sp[3] = {1, 1, 1}, org[3] = {0, 0, 0};
  std::vector<float> data(8000);
  for (int i = 0; i < 8000; ++i) data[i] = static_cast<float>((i * 7919) % 1000);
  dv_volume* v = nullptr;
  REQUIRE(dv_volume_create(dims, sp, org, data.data(), &v) == DV_OK);
  dv_phansalkar_params p = dv_phansalkar_defaults();
  p.window_radius = 3;
  dv_labels *a = nullptr, *b = nullptr;
  dv_set_threads(1);
  REQUIRE(dv_phansalkar(v, &p, nullptr, &a) == DV_OK);
  dv_set_threads(8);
  REQUIRE(dv_phansalkar(v, &p, nullptr, &b) == DV_OK);
  dv_set_threads(0);
  CHECK(std::memcmp(dv_labels_data(a), dv_labels_data(b), 8000) == 0);
  dv_labels_free(a);
  dv_labels_free(b);
  dv_volume_free(v);
}
