#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

#include "fsplat/covariance.hpp"
#include "fsplat/errors.hpp"
#include "fsplat/projection.hpp"
#include "oracles.hpp"

using namespace fsplat;
using fsplat::test::uniform;

namespace {

// Standalone quaternion-to-matrix formula, written against the textbook
// expression rather than the production code.
Mat3 oracle_rotation(Vec4 q) {
    q.normalize();
    double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Camera test_camera(double fx = 100.0, double fy = 100.0) {
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 16;
    cam.cy = 16;
    cam.width = 32;
    cam.height = 32;
    return cam;
}

}  // namespace

TEST(Covariance, IdentityQuaternionUnitScaleGivesIdentity) {
    Mat3 sigma = build_covariance(Vec4(1, 0, 0, 0), Vec3::Zero());
    EXPECT_LT((sigma - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, AxisAlignedScales) {
    Mat3 sigma = build_covariance(Vec4(1, 0, 0, 0), Vec3(std::log(2.0), 0.0, 0.0));
    Mat3 expected = Vec3(4, 1, 1).asDiagonal();
    EXPECT_LT((sigma - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, NinetyDegreesAboutZSwapsAxes) {
    double s = std::sin(M_PI / 4), c = std::cos(M_PI / 4);
    Vec4 q(c, 0, 0, s);
    Mat3 sigma = build_covariance(q, Vec3(std::log(2.0), 0.0, 0.0));
    Mat3 r = oracle_rotation(q);
    Mat3 expected = r * Vec3(4, 1, 1).asDiagonal() * r.transpose();
    EXPECT_LT((sigma - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(sigma(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(sigma(1, 1), 4.0, 1e-12);
    EXPECT_NEAR(sigma(2, 2), 1.0, 1e-12);
}

TEST(Covariance, MatchesQuaternionOracleOnRandomInputs) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        Vec4 q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1),
               uniform(rng, -1, 1));
        if (q.norm() < 0.1) q[0] += 1.0;
        Vec3 ls(uniform(rng, -1, 0.5), uniform(rng, -1, 0.5), uniform(rng, -1, 0.5));
        Mat3 sigma = build_covariance(q, ls);
        Mat3 r = oracle_rotation(q);
        Vec3 d = (2.0 * ls).array().exp();
        Mat3 expected = r * d.asDiagonal() * r.transpose();
        EXPECT_LT((sigma - expected).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Covariance, OutputIsSymmetricPositiveDefinite) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
        Vec4 q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1),
               uniform(rng, -1, 1));
        if (q.norm() < 0.1) q[0] += 1.0;
        Vec3 ls(uniform(rng, -2, 1), uniform(rng, -2, 1), uniform(rng, -2, 1));
        Mat3 sigma = build_covariance(q, ls);
        EXPECT_LT((sigma - sigma.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::LLT<Mat3> llt(sigma);
        EXPECT_EQ(llt.info(), Eigen::Success);
    }
}

TEST(Covariance, NonFiniteInputThrows) {
    EXPECT_THROW(build_covariance(Vec4(1, 0, 0, std::nan("")), Vec3::Zero()), NumericError);
}

TEST(Covariance, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(13);
    Vec4 q(0.9, 0.2, -0.3, 0.1);
    Vec3 ls(-0.2, 0.1, -0.5);
    Mat3 w;  // arbitrary linear functional L = <w, sigma>
    for (int i = 0; i < 9; ++i) w.data()[i] = uniform(rng, -1, 1);

    CovarianceContext ctx;
    build_covariance(q, ls, &ctx);
    Vec4 gq = Vec4::Zero();
    Vec3 gl = Vec3::Zero();
    build_covariance_backward(ctx, w, &gq, &gl);

    const double h = 1e-6;
    for (int i = 0; i < 4; ++i) {
        Vec4 qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        double fd = ((build_covariance(qp, ls).array() * w.array()).sum() -
                     (build_covariance(qm, ls).array() * w.array()).sum()) /
                    (2 * h);
        EXPECT_NEAR(gq[i], fd, 1e-6 + 1e-6 * std::abs(fd));
    }
    for (int i = 0; i < 3; ++i) {
        Vec3 lp = ls, lm = ls;
        lp[i] += h;
        lm[i] -= h;
        double fd = ((build_covariance(q, lp).array() * w.array()).sum() -
                     (build_covariance(q, lm).array() * w.array()).sum()) /
                    (2 * h);
        EXPECT_NEAR(gl[i], fd, 1e-6 + 1e-6 * std::abs(fd));
    }
}

TEST(Projection, OnAxisIsotropicFollowsFocalOverDepth) {
    Camera cam = test_camera();
    const double eps2 = 0.01;  // epsilon = 0.1
    Mat3 sigma = Mat3::Identity() * eps2;
    ProjectionResult res = project_gaussian(Vec3(0, 0, 1), sigma, cam, nullptr, 0.0);
    ASSERT_TRUE(res.in_frustum);
    EXPECT_NEAR(res.cov2d(0, 0), 100.0 * 100.0 * eps2, 1e-6);
    EXPECT_NEAR(res.cov2d(1, 1), 100.0 * 100.0 * eps2, 1e-6);
    EXPECT_NEAR(res.cov2d(0, 1), 0.0, 1e-9);
    EXPECT_NEAR(res.depth, 1.0, 1e-12);

    ProjectionResult res2 = project_gaussian(Vec3(0, 0, 2), sigma, cam, nullptr, 0.0);
    EXPECT_NEAR(res2.cov2d(0, 0), 50.0 * 50.0 * eps2, 1e-6);
    EXPECT_NEAR(res2.cov2d(1, 1), 50.0 * 50.0 * eps2, 1e-6);
}

TEST(Projection, FloorIsAddedToTheDiagonal) {
    Camera cam = test_camera();
    Mat3 sigma = Mat3::Identity() * 1e-8;
    ProjectionResult bare = project_gaussian(Vec3(0, 0, 1), sigma, cam, nullptr, 0.0);
    ProjectionResult floored = project_gaussian(Vec3(0, 0, 1), sigma, cam, nullptr, 0.3);
    EXPECT_NEAR(floored.cov2d(0, 0) - bare.cov2d(0, 0), 0.3, 1e-12);
    EXPECT_NEAR(floored.cov2d(1, 1) - bare.cov2d(1, 1), 0.3, 1e-12);
    EXPECT_NEAR(floored.cov2d(0, 1), bare.cov2d(0, 1), 1e-12);
}

TEST(Projection, OffAxisMatchesNumericalJacobian) {
    Camera cam = test_camera();
    // Nontrivial world-to-camera so W participates.
    double a = 0.3;
    Mat3 rz;
    rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    cam.world_to_camera.topLeftCorner<3, 3>() = rz;
    cam.world_to_camera.topRightCorner<3, 1>() = Vec3(0.05, -0.02, 0.1);

    std::mt19937_64 rng(21);
    Vec3 mu(0.5, 0.0, 1.0);
    Vec3 ls(std::log(0.05), std::log(0.08), std::log(0.03));
    Vec4 q(0.8, 0.1, -0.2, 0.3);
    Mat3 sigma = build_covariance(q, ls);

    ProjectionResult res = project_gaussian(mu, sigma, cam, nullptr, 0.0);
    ASSERT_TRUE(res.in_frustum);

    // Numerical 2x3 Jacobian of the full world-to-pixel map at mu.
    Eigen::Matrix<double, 2, 3> jn;
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        Vec3 mp = mu, mm = mu;
        mp[i] += h;
        mm[i] -= h;
        Vec2 pp = cam.project(cam.to_camera(mp));
        Vec2 pm = cam.project(cam.to_camera(mm));
        jn.col(i) = (pp - pm) / (2 * h);
    }
    Mat2 expected = jn * sigma * jn.transpose();
    EXPECT_LT((res.cov2d - expected).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Projection, CullsBehindNearPlane) {
    Camera cam = test_camera();
    cam.near_plane = 0.5;
    Mat3 sigma = Mat3::Identity() * 0.01;
    EXPECT_FALSE(project_gaussian(Vec3(0, 0, -1), sigma, cam).in_frustum);
    EXPECT_FALSE(project_gaussian(Vec3(0, 0, 0.4), sigma, cam).in_frustum);
    EXPECT_TRUE(project_gaussian(Vec3(0, 0, 0.6), sigma, cam).in_frustum);
}

TEST(Projection, BackwardMatchesFiniteDifferences) {
    Camera cam = test_camera();
    cam.world_to_camera.topRightCorner<3, 1>() = Vec3(0.1, 0.05, 0.0);
    Vec3 mu(0.2, -0.1, 1.2);
    Vec4 q(1.0, 0.2, 0.1, -0.1);
    Vec3 ls(std::log(0.05), std::log(0.07), std::log(0.04));
    Mat3 sigma = build_covariance(q, ls);

    std::mt19937_64 rng(31);
    Vec2 wm(uniform(rng, -1, 1), uniform(rng, -1, 1));
    Mat2 wc;
    for (int i = 0; i < 4; ++i) wc.data()[i] = uniform(rng, -1, 1);
    double wd = uniform(rng, -1, 1);
    auto loss = [&](const Vec3& m, const Mat3& s) {
        ProjectionResult r = project_gaussian(m, s, cam, nullptr, 0.0);
        return wm.dot(r.mean2d) + (wc.array() * r.cov2d.array()).sum() + wd * r.depth;
    };

    ProjectionContext ctx;
    project_gaussian(mu, sigma, cam, &ctx, 0.0);
    Vec3 gmu = Vec3::Zero();
    Mat3 gsigma = Mat3::Zero();
    project_gaussian_backward(ctx, wm, wc, wd, &gmu, &gsigma);

    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        Vec3 mp = mu, mm = mu;
        mp[i] += h;
        mm[i] -= h;
        double fd = (loss(mp, sigma) - loss(mm, sigma)) / (2 * h);
        EXPECT_NEAR(gmu[i], fd, 1e-5 + 1e-5 * std::abs(fd));
    }
    for (int i = 0; i < 9; ++i) {
        Mat3 sp = sigma, sm = sigma;
        sp.data()[i] += h;
        sm.data()[i] -= h;
        double fd = (loss(mu, sp) - loss(mu, sm)) / (2 * h);
        EXPECT_NEAR(gsigma.data()[i], fd, 1e-6 + 1e-5 * std::abs(fd));
    }
}

TEST(Camera, UnprojectInvertsProjectAtPixelCenters) {
    Camera cam = test_camera(80.0, 90.0);
    cam.world_to_camera.topRightCorner<3, 1>() = Vec3(0.2, -0.3, 0.5);
    double a = -0.4;
    Mat3 rx;
    rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    cam.world_to_camera.topLeftCorner<3, 3>() = rx;

    std::mt19937_64 rng(41);
    for (int i = 0; i < 20; ++i) {
        double px = uniform(rng, 0, 32), py = uniform(rng, 0, 32), z = uniform(rng, 0.5, 3.0);
        Vec3 world = cam.unproject(px, py, z);
        Vec3 t_cam = cam.to_camera(world);
        Vec2 pix = cam.project(t_cam);
        EXPECT_NEAR(pix.x(), px, 1e-9);
        EXPECT_NEAR(pix.y(), py, 1e-9);
        EXPECT_NEAR(t_cam.z(), z, 1e-9);
    }
}
