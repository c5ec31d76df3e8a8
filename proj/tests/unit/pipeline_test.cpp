#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "flowmesh/errors.hpp"
#include "flowmesh/pipeline.hpp"
#include "flowmesh/raster.hpp"
#include "flowmesh/samples.hpp"

using namespace flowmesh;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_scene(const fixtures::TempDir& dir, const std::string& out) {
  const DomeScene scene = dome_scene(65, 40, 8, 16.0);
  write_file_bytes(dir / "depth.png", encode_depth_png(scene.depth));
  write_file_bytes(dir / "spec.json", dump_json(drag_spec_to_json(scene.spec)));
  PipelineConfig c;
  c.depth = dir / "depth.png";
  c.spec = dir / "spec.json";
  c.out_dir = dir / out;
  c.deform.steps = 3;
  return c;
}

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(PipelineConfig, JsonResolvesPathsAndKeepsDefaults) {
  const Json j = parse_json(R"({"depth":"d.png","spec":"/abs/s.json","out":"o","tau_b":"auto","grid":12,
                               "deform":{"beta":0.2},"sweep":[0.25]})");
  const PipelineConfig c = pipeline_config_from_json(j, "/base");
  EXPECT_EQ(c.depth, fs::path("/base/d.png"));
  EXPECT_EQ(c.spec, fs::path("/abs/s.json"));
  EXPECT_EQ(c.out_dir, fs::path("/base/o"));
  EXPECT_FALSE(c.mesh.tau_b.has_value());
  EXPECT_EQ(c.mesh.tau_d, 0.1);
  EXPECT_EQ(c.grid.n, 12);
  EXPECT_EQ(c.deform.beta, 0.2);
  EXPECT_EQ(c.deform.alpha, DeformParams{}.alpha);
  EXPECT_EQ(c.count, 10);
  EXPECT_EQ(c.sweep, std::vector<double>{0.25});
  EXPECT_THROW(pipeline_config_from_json(parse_json(R"({"grid":"many"})"), "/"), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(parse_json(R"({"tau_b":"high"})"), "/"), ConfigError);
}

TEST(PipelineConfig, ValidationNamesMissingInputs) {
  PipelineConfig c;
  EXPECT_THROW(c.validate(), ConfigError);
  c.depth = "/nonexistent/depth.png";
  c.spec = "/nonexistent/spec.json";
  c.out_dir = "/tmp/x";
  try {
    c.validate();
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/depth.png"), std::string::npos);
  }
}

TEST(Pipeline, WritesArtifactsAndIsDeterministic) {
  fixtures::TempDir dir("pipeline");
  PipelineConfig a = small_scene(dir, "a");
  a.write_csv = true;
  PipelineConfig b = a;
  b.out_dir = dir / "b";
  const PipelineResult ra = run_pipeline(a);
  const PipelineResult rb = run_pipeline(b);
  for (const char* name : {"mesh.obj", "flow.json", "flow.csv", "report.json", "manifest.json", "trace/trace.json",
                           "trace/step_0000.obj", "trace/step_0003.obj"}) {
    EXPECT_TRUE(fs::exists(a.out_dir / name)) << name;
  }
  EXPECT_EQ(ra.manifest["hashed"].dump(), rb.manifest["hashed"].dump());
  EXPECT_EQ(ra.manifest["hashed_sha256"], rb.manifest["hashed_sha256"]);
  EXPECT_EQ(ra.manifest["hashed_sha256"], sha256_hex(ra.manifest["hashed"].dump()));
  EXPECT_EQ(read_file_bytes(a.out_dir / "flow.json"), read_file_bytes(b.out_dir / "flow.json"));
  EXPECT_EQ(ra.run.sampled.vectors.size(), 10u);
  EXPECT_EQ(ra.manifest["hashed"]["config"]["tau_b"], "auto");
  EXPECT_GT(ra.report.melr, 0.0);
}

TEST(Pipeline, HandleLandsOnTargetInFinalSnapshot) {
  fixtures::TempDir dir("pipeline-target");
  const PipelineResult r = run_pipeline(small_scene(dir, "out"));
  const auto& cs = r.run.constraints;
  for (std::size_t h = 0; h < cs.handles.size(); ++h) {
    EXPECT_EQ(r.run.trace.final_positions()[cs.handles[h]], cs.targets[h]);
  }
}

TEST(Pipeline, SweepRecordsEachRatio) {
  fixtures::TempDir dir("pipeline-sweep");
  PipelineConfig c = small_scene(dir, "out");
  c.sweep = {0.25};
  const PipelineResult r = run_pipeline(c);
  ASSERT_TRUE(r.sweep.has_value());
  ASSERT_EQ(r.sweep->entries.size(), 2u);
  EXPECT_EQ(r.sweep->entries[0].ratio, 1.0);
  EXPECT_EQ(r.sweep->entries[0].max_deviation, 0.0);
  EXPECT_EQ(r.sweep->entries[1].stride, 2);
  EXPECT_LT(r.sweep->entries[1].vertices, r.sweep->entries[0].vertices);
  EXPECT_TRUE(fs::exists(c.out_dir / "sweep.json"));
}

TEST(Pipeline, MaskOverrideIsHashed) {
  fixtures::TempDir dir("pipeline-mask");
  PipelineConfig c = small_scene(dir, "out");
  write_file_bytes(dir / "mask.png", encode_mask_png(disk_mask(65, 65, 40, 32, 12)));
  c.mask = dir / "mask.png";
  const PipelineResult r = run_pipeline(c);
  EXPECT_TRUE(r.manifest["hashed"]["inputs"].contains("mask"));
}

TEST(Pipeline, BackgroundOnlyDepthIsEmptyResult) {
  fixtures::TempDir dir("pipeline-empty");
  PipelineConfig c = small_scene(dir, "out");
  c.mesh.tau_b = 0.99;
  EXPECT_THROW(run_pipeline(c), EmptyResultError);
}
