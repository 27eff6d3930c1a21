#include "mmshot/fusion.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace mmshot {
namespace {

const Dimensions kDims{5, 4, 3};

ModelInputs random_inputs(Rng& rng, ModalitySet mods, Eigen::Index batch) {
  ModelInputs in;
  for (auto m : mods.list()) {
    Matrix x(static_cast<Eigen::Index>(modality_dim(kDims, m)), batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    in.of(m) = x;
  }
  return in;
}

Matrix random_labels(Rng& rng, Eigen::Index g, Eigen::Index batch) {
  Matrix y(g, batch);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  return y;
}

TEST(Modalities, ParseAndPrint) {
  EXPECT_EQ(ModalitySet::parse("v,a,l"), ModalitySet::all());
  EXPECT_EQ(ModalitySet::parse("l,v").to_string(), "v,l");
  EXPECT_EQ(ModalitySet::parse("a").count(), 1u);
  EXPECT_THROW(ModalitySet::parse(""), Error);
  EXPECT_THROW(ModalitySet::parse("v,x"), Error);
  EXPECT_EQ(parse_strategy("late"), FusionStrategy::kLate);
  EXPECT_THROW(parse_strategy("mid"), Error);
}

class StrategyTest : public ::testing::TestWithParam<FusionStrategy> {};

TEST_P(StrategyTest, GradientsMatchFiniteDifferences) {
  Rng rng(10 + static_cast<int>(GetParam()));
  for (const char* mods : {"v,a,l", "v", "a,l"}) {
    const auto set = ModalitySet::parse(mods);
    auto model = GenreModel::create(GetParam(), set, GenreTaxonomy::first(4), kDims, 6, rng);
    const auto in = random_inputs(rng, set, 5);
    const auto y = random_labels(rng, 4, 5);
    auto grads = training_loss_and_gradients(model, in, y);
    const auto r = grad_check([&] { return training_loss(model, in, y); }, model.parameters(), grads.spans());
    EXPECT_LT(r.max_relative_error, 1e-4) << to_string(GetParam()) << " " << mods;
    EXPECT_GT(r.checked, 50u);
  }
}

TEST_P(StrategyTest, OutputsAreProbabilities) {
  Rng rng(1);
  const auto model = GenreModel::create(GetParam(), ModalitySet::all(), GenreTaxonomy::first(4), kDims, 8, rng);
  const auto p = predict(model, random_inputs(rng, ModalitySet::all(), 7));
  EXPECT_EQ(p.rows(), 4);
  EXPECT_EQ(p.cols(), 7);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_LE(p.maxCoeff(), 1.0);
}

TEST_P(StrategyTest, CheckpointRoundTripPredictsIdentically) {
  testing::TempDir dir;
  Rng rng(2);
  auto model = GenreModel::create(GetParam(), ModalitySet::parse("v,l"), GenreTaxonomy::first(3), kDims, 4, rng);
  model.quantize();
  write_model(dir.file("m.ckpt"), model, 77);
  const auto back = read_model(dir.file("m.ckpt"));
  EXPECT_EQ(back, model);
  const auto in = random_inputs(rng, model.modalities, 3);
  EXPECT_EQ(predict(back, in), predict(model, in));
}

INSTANTIATE_TEST_SUITE_P(Fusion, StrategyTest,
                         ::testing::Values(FusionStrategy::kEarly, FusionStrategy::kIntermediate,
                                           FusionStrategy::kLate),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Late, PredictionIsMeanOfBranchOutputs) {
  Rng rng(3);
  const auto model = GenreModel::create(FusionStrategy::kLate, ModalitySet::all(), GenreTaxonomy::first(4), kDims, 8,
                                        rng);
  const auto in = random_inputs(rng, ModalitySet::all(), 20);
  const auto p = predict(model, in);
  const auto branches = branch_predictions(model, in);
  ASSERT_EQ(branches.size(), 3u);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double mean = (branches[0].data()[i] + branches[1].data()[i] + branches[2].data()[i]) / 3.0;
    EXPECT_LE(std::abs(p.data()[i] - mean), std::nextafter(mean, 2.0) - mean);
  }
}

TEST(Inputs, WrongShapesAreRejected) {
  Rng rng(4);
  const auto model = GenreModel::create(FusionStrategy::kIntermediate, ModalitySet::parse("v"), GenreTaxonomy::first(2),
                                        kDims, 4, rng);
  auto in = random_inputs(rng, ModalitySet::all(), 2);
  EXPECT_THROW(predict(model, in), Error);  // audio given to a visual-only model
  in.of(Modality::kAudio).resize(0, 0);
  in.of(Modality::kLanguage).resize(0, 0);
  EXPECT_NO_THROW(predict(model, in));
  in.of(Modality::kVisual) = Matrix::Zero(2, 2);
  EXPECT_THROW(predict(model, in), Error);
}

TEST(Compatibility, DimensionMismatchNamesBothDims) {
  Rng rng(5);
  const auto model = GenreModel::create(FusionStrategy::kIntermediate, ModalitySet::all(), GenreTaxonomy::first(2),
                                        {512, 4, 3}, 4, rng);
  Dataset ds;
  ds.taxonomy = GenreTaxonomy::first(2);
  ds.dims = {256, 4, 3};
  try {
    check_compatible(model, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("512"), std::string::npos);
    EXPECT_NE(msg.find("256"), std::string::npos);
  }
}

SynthResult small_synth(std::uint64_t seed) {
  SynthConfig c;
  c.num_videos = 120;
  c.num_genres = 4;
  c.visual_dim = c.audio_dim = c.language_dim = 8;
  c.shots_per_video = 10;
  return synth_dataset(c, seed);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 32;
  cfg.hidden_dim = 16;
  cfg.max_lr = 1e-2;
  cfg.seed = 3;
  return cfg;
}

TEST(Train, SameSeedGivesIdenticalModels) {
  const auto s = small_synth(1);
  const auto a = train(s.dataset, small_config(), &s.embeddings);
  const auto b = train(s.dataset, small_config(), &s.embeddings);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
  EXPECT_EQ(a.history.size(), 15u);
  auto other = small_config();
  other.seed = 4;
  EXPECT_NE(train(s.dataset, other, &s.embeddings).model, a.model);
}

TEST(Train, ThreadCountDoesNotChangeTheModel) {
  const auto s = small_synth(2);
  auto cfg = small_config();
  cfg.epochs = 3;
  const auto a = train(s.dataset, cfg, &s.embeddings);
  cfg.threads = 3;
  EXPECT_EQ(train(s.dataset, cfg, &s.embeddings).model, a.model);
}

TEST(Train, ZeroEpochsReturnsInitialisedModel) {
  const auto s = small_synth(3);
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto r = train(s.dataset, cfg, &s.embeddings);
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_TRUE(r.history.empty());
  Rng init(derive_seed(cfg.seed, "init"));
  auto expected = GenreModel::create(cfg.strategy, cfg.modalities, s.dataset.taxonomy, s.dataset.dims,
                                     cfg.hidden_dim, init);
  expected.quantize();
  EXPECT_EQ(r.model, expected);
}

TEST(Train, LearnsPlantedGenres) {
  const auto s = small_synth(4);
  const auto r = train(s.dataset, small_config(), &s.embeddings);
  const auto preds = infer_dataset(r.model, s.dataset, Split::kTest, &s.embeddings);
  EXPECT_GT(genre_report(preds, s.dataset).macro.map, 0.8);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
}

TEST(Train, LanguageWithoutTableIsAnError) {
  const auto s = small_synth(5);
  EXPECT_THROW(train(s.dataset, small_config(), nullptr), Error);
  auto cfg = small_config();
  cfg.modalities = ModalitySet::parse("v,a");
  cfg.epochs = 1;
  EXPECT_NO_THROW(train(s.dataset, cfg, nullptr));
}

TEST(Train, DegenerateSplitsAreRejected) {
  auto s = small_synth(6);
  for (auto& r : s.dataset.records) r.split = Split::kTrain;
  EXPECT_THROW(train(s.dataset, small_config(), &s.embeddings), Error);
}

TEST(Train, DropoutStillLearnsAndStaysDeterministic) {
  const auto s = small_synth(7);
  auto cfg = small_config();
  cfg.dropout = 0.2;
  const auto a = train(s.dataset, cfg, &s.embeddings);
  EXPECT_EQ(train(s.dataset, cfg, &s.embeddings).model, a.model);
}

TEST(Assemble, OutOfVocabularyTranscriptGivesZeroLanguage) {
  const auto s = small_synth(8);
  auto record = s.dataset.records[0];
  record.transcript = {{"qqqq", PartOfSpeech::kNoun}};
  const auto f = assemble_inputs(record, &s.embeddings, ModalitySet::all(), false, 0);
  EXPECT_TRUE(f.language_out_of_vocabulary);
  EXPECT_EQ(f.language, FeatureVector(8, 0.0f));
  EXPECT_EQ(f.audio, record.audio_embedding);
}

}  // namespace
}  // namespace mmshot
