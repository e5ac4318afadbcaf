#pragma once

#include "fsplat/types.hpp"

namespace fsplat {

// Pinhole camera. world_to_camera maps world points into a right-handed camera
// frame with +z in front of the camera; pixel (x, y) = (fx*X/Z + cx, fy*Y/Z + cy)
// with y growing downward.
struct Camera {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    double near_plane = 0.01;
    double far_plane = 100.0;
    Mat4 world_to_camera = Mat4::Identity();

    Vec3 to_camera(const Vec3& p_world) const {
        return world_to_camera.topLeftCorner<3, 3>() * p_world + world_to_camera.topRightCorner<3, 1>();
    }
    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }

    Vec2 project(const Vec3& t_cam) const {
        return {fx * t_cam.x() / t_cam.z() + cx, fy * t_cam.y() / t_cam.z() + cy};
    }

    // Pixel center (x + 0.5, y + 0.5) at camera depth z back to world space.
    Vec3 unproject(double px, double py, double z) const {
        Vec3 t_cam((px - cx) * z / fx, (py - cy) * z / fy, z);
        Mat3 R = rotation();
        Vec3 t = world_to_camera.topRightCorner<3, 1>();
        return R.transpose() * (t_cam - t);
    }

    Vec3 camera_center() const {
        Mat3 R = rotation();
        Vec3 t = world_to_camera.topRightCorner<3, 1>();
        return -R.transpose() * t;
    }
};

}  // namespace fsplat
