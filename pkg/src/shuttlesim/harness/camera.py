"""Scripted camera motion standing in for a learned perception policy."""

from __future__ import annotations

import math

import numpy as np

from ..perception import CameraModel, CameraTrack, rotation_from_yaw_pitch
from .config import CameraConfig


def camera_model(cfg: CameraConfig) -> CameraModel:
    return CameraModel(
        position=cfg.position,
        orientation=rotation_from_yaw_pitch(math.radians(cfg.yaw_deg), math.radians(cfg.pitch_deg)),
        h_fov=math.radians(cfg.h_fov_deg),
        v_fov=math.radians(cfg.v_fov_deg),
        frame_rate=cfg.frame_rate,
        latency_range=cfg.latency,
    )


def _log_rotations(rel: np.ndarray) -> np.ndarray:
    """Rotation vectors of a stack of (n, 3, 3) rotation matrices."""
    tr = np.trace(rel, axis1=1, axis2=2)
    theta = np.arccos(np.clip(0.5 * (tr - 1.0), -1.0, 1.0))
    skew = np.stack([rel[:, 2, 1] - rel[:, 1, 2], rel[:, 0, 2] - rel[:, 2, 0], rel[:, 1, 0] - rel[:, 0, 1]], axis=1)
    s = np.sin(theta)
    scale = np.where(s > 1e-12, theta / np.where(s > 1e-12, 2.0 * s, 1.0), 0.5)
    return skew * scale[:, None]


def _track_from_orientations(cam: CameraModel, times: np.ndarray, rots: np.ndarray) -> CameraTrack:
    # body rate on [t_k, t_k+1] maps R_k onto R_k+1 exactly
    n = len(times)
    omega = np.zeros((n, 3))
    if n > 1:
        rel = np.einsum("kji,kjl->kil", rots[1:], rots[:-1])  # R_{k+1}^T R_k = C_{k+1} C_k^T
        omega[:-1] = _log_rotations(rel) / np.diff(times)[:, None]
        omega[-1] = omega[-2]
    positions = np.broadcast_to(cam.position, (n, 3))
    return CameraTrack(cam, times, positions, rots, omega, velocity=np.zeros((n, 3)))


def fixed_track(cam: CameraModel, times) -> CameraTrack:
    times = np.asarray(times, float)
    return CameraTrack.static(cam, float(times[0]), float(times[-1]))


def _rotations_looking_along(dirs: np.ndarray) -> np.ndarray:
    """Roll-free world-to-camera rotations for unit optical axes ``dirs`` (n, 3)."""
    yaw = np.arctan2(dirs[:, 1], dirs[:, 0])
    pitch = np.arctan2(dirs[:, 2], np.hypot(dirs[:, 0], dirs[:, 1]))
    return _rotations_yaw_pitch(yaw, pitch)


def _rotations_yaw_pitch(yaw, pitch) -> np.ndarray:
    yaw, pitch = np.broadcast_arrays(np.asarray(yaw, float), np.asarray(pitch, float))
    cy, sy, cp, sp = np.cos(yaw), np.sin(yaw), np.cos(pitch), np.sin(pitch)
    fwd = np.stack([cy * cp, sy * cp, sp], axis=1)
    left = np.stack([-sy, cy, np.zeros_like(cy)], axis=1)
    up = np.stack([-cy * sp, -sy * sp, cp], axis=1)
    return np.stack([fwd, left, up], axis=1)


def tracking_track(cam: CameraModel, times, targets, max_rate: float) -> CameraTrack:
    """Ideal line-of-sight tracking: the optical axis turns toward the target
    along the great circle, at most ``max_rate`` rad/s, with zero roll."""
    times = np.asarray(times, float)
    rel = np.asarray(targets, float) - cam.position
    norms = np.linalg.norm(rel, axis=1)
    wants = (rel / np.where(norms > 0, norms, 1.0)[:, None]).tolist()
    steps = (max_rate * np.diff(times)).tolist()
    fx, fy, fz = wants[0]
    dirs = [(fx, fy, fz)]
    for k in range(1, len(times)):
        if norms[k] > 0:
            wx, wy, wz = wants[k]
            c = min(max(fx * wx + fy * wy + fz * wz, -1.0), 1.0)
            angle = math.acos(c)
            step = steps[k - 1]
            if angle <= step:
                fx, fy, fz = wx, wy, wz
            else:
                ox, oy, oz = wx - c * fx, wy - c * fy, wz - c * fz
                on = math.sqrt(ox * ox + oy * oy + oz * oz)
                cs, sn = math.cos(step), math.sin(step) / on
                fx, fy, fz = cs * fx + sn * ox, cs * fy + sn * oy, cs * fz + sn * oz
                n = math.sqrt(fx * fx + fy * fy + fz * fz)
                fx, fy, fz = fx / n, fy / n, fz / n
        dirs.append((fx, fy, fz))
    return _track_from_orientations(cam, times, _rotations_looking_along(np.array(dirs)))


def pitch_profile_track(cam: CameraModel, times, yaw: float, keyframes) -> CameraTrack:
    """Fixed yaw with pitch linearly interpolated between (t, pitch rad) keyframes."""
    times = np.asarray(times, float)
    kf = np.asarray(keyframes, float).reshape(-1, 2)
    pitch = np.interp(times, kf[:, 0], kf[:, 1])
    return _track_from_orientations(cam, times, _rotations_yaw_pitch(yaw, pitch))


def build_camera_track(cfg: CameraConfig, times, targets, script: str | None = None) -> CameraTrack:
    """Camera track for ``script`` (default ``cfg.script``) sampled at ``times``.

    ``targets`` are the true shuttle positions at ``times``; only the tracking
    script looks at them.
    """
    cam = camera_model(cfg)
    script = cfg.script if script is None else script
    if script == "fixed":
        return fixed_track(cam, times)
    if script == "tracking":
        return tracking_track(cam, times, targets, cfg.max_rate)
    if script == "pitch_profile":
        kf = [(t, math.radians(p)) for t, p in cfg.keyframes]
        return pitch_profile_track(cam, times, math.radians(cfg.yaw_deg), kf)
    raise ValueError(f"unknown camera script {script!r}")
