#include <gtest/gtest.h>

#include "greenpeel/errors.hpp"
#include "greenpeel/evaluation.hpp"
#include "greenpeel/oracle.hpp"
#include "greenpeel/peeling.hpp"

using namespace greenpeel;

TEST(DatasetLearning, RecordedActiveRunReplaysBitForBit) {
    const Grid g(2, 16);
    const DiscreteOperator op = assemble(g, CoefficientField::preset("smooth"));
    const PdeOracle pde(op);
    for (bool adaptive : {false, true}) {
        PeelConfig cfg;
        cfg.levels = 2;
        cfg.near_field = NearFieldPolicy::dense_probe;
        if (!adaptive) cfg.fixed_ranks = {3};
        RecordingOracle recorder(pde);
        const LearnResult active = learn(recorder, cfg);
        const DatasetLearnResult passive = learn_from_dataset(recorder.record(), cfg);
        EXPECT_EQ(passive.diagnostics.mode, "replay");
        EXPECT_EQ((passive.result.approx.to_dense() - active.approx.to_dense()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(passive.result.ledger.training_total(), active.ledger.training_total());
    }
}

TEST(DatasetLearning, ConstantForcingsAreNotDiverse) {
    const Grid g(1, 64);
    const DiscreteOperator op = assemble(g, CoefficientField::identity());
    TrainingSet data(g);
    Matrix f(64, 5);
    for (int j = 0; j < 5; ++j) f.col(j).setConstant(j + 1.0);
    data.append(f, op.solve(f, Execution::serial()));
    PeelConfig cfg;
    cfg.levels = 3;
    try {
        learn_from_dataset(data, cfg);
        FAIL() << "expected InsufficientDiversity";
    } catch (const InsufficientDiversity& e) {
        EXPECT_EQ(e.level(), first_admissible_level);
        EXPECT_EQ(e.starved_boxes().size(), 4u);
        EXPECT_NE(std::string(e.what()).find("insufficient probe diversity"), std::string::npos);
    }
}

TEST(DatasetLearning, WhiteNoiseDatasetLearnsPoisson) {
    const Grid g(1, 128);
    const DiscreteOperator op = assemble(g, CoefficientField::identity());
    const Matrix f = CovarianceFactor::white(128, 17).draw(400, 1);
    TrainingSet data(g);
    data.append(f, op.solve(f, Execution::serial()));
    PeelConfig cfg;
    cfg.levels = 4;
    cfg.near_field = NearFieldPolicy::dense_probe;
    const DatasetLearnResult r = learn_from_dataset(data, cfg);
    EXPECT_EQ(r.diagnostics.mode, "least_squares");
    EXPECT_EQ(r.result.ledger.training_total(), 400u);
    const ExactErrors e = evaluate_exact(r.result.approx, op);
    EXPECT_LE(e.err_hs_rel, 5e-2);
    for (int l = 2; l <= 4; ++l)
        for (double energy : r.diagnostics.box_energy[l]) EXPECT_GT(energy, 0.5);
}

TEST(DatasetLearning, EmptyDatasetRejected) {
    PeelConfig cfg;
    EXPECT_THROW(learn_from_dataset(TrainingSet(Grid(1, 64)), cfg), ValidationError);
}
