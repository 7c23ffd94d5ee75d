import numpy as np
import pytest

from remoteframe.devicesim import (
    CompositeInputEvent,
    DeviceSimulator,
    ManualClock,
    PointerSample,
    ScenarioPlayer,
    ScenarioScript,
    ScenarioStep,
    builtin_generators,
    load_scenario,
    benchmark_workload,
    parse_scenario,
)
from remoteframe.devicesim.generators import BROWSER_CHROME_ROWS, browser_scroll, home, music_player
from remoteframe.errors import (
    DuplicateIdError,
    InvalidArgumentError,
    IsADirectoryError_,
    NotFoundError,
    PathEscapeError,
    ScenarioFormatError,
    TimeRegressionError,
    UnknownCommandError,
    UnknownGeneratorError,
    UnsupportedSensorError,
)


def small_script(**overrides) -> ScenarioScript:
    fields = dict(
        width=96,
        height=128,
        seed=3,
        tap_skip=False,
        steps=(
            ScenarioStep("home", 500, {"icons": 4}),
            ScenarioStep("transition", 200),
            ScenarioStep("browser_scroll", 800),
        ),
    )
    fields.update(overrides)
    script = ScenarioScript(**fields)
    script.validate()
    return script


class TestScenario:
    def test_benchmark_workload_shape(self):
        script = benchmark_workload()
        assert len(script.steps) == 7
        assert script.total_duration_ms == 10_000
        assert script.steps[2] == ScenarioStep("browser_scroll", 3000)
        assert script.steps[4] == ScenarioStep("music_player", 3000)

    def test_checked_in_workload_file_matches_builtin(self):
        script = load_scenario("scenarios/benchmark-workload.rfscn")
        builtin = benchmark_workload()
        assert script.steps == builtin.steps
        assert (script.width, script.height, script.seed) == (
            builtin.width,
            builtin.height,
            builtin.seed,
        )

    def test_empty_step_list_rejected(self):
        with pytest.raises(ScenarioFormatError):
            ScenarioScript(steps=()).validate()

    def test_unknown_generator_rejected(self):
        with pytest.raises(UnknownGeneratorError):
            parse_scenario("step warp_drive 100")

    def test_transition_needs_neighbours(self):
        with pytest.raises(ScenarioFormatError):
            parse_scenario("step transition 300\nstep home 100")

    def test_parse_round_trips_settings(self):
        script = parse_scenario(
            "screen = 320x240\nseed = 42\ntap_skip = on\nstep home 100 icons=8\n"
        )
        assert (script.width, script.height, script.seed, script.tap_skip) == (320, 240, 42, True)
        assert script.steps[0].params == {"icons": 8}

    def test_sensor_tables_sorted(self):
        script = parse_scenario(
            "step home 100\nsensor gps 500 1.0 2.0\nsensor gps 0 0.0 0.0\n"
        )
        assert [t for t, _ in script.sensors["gps"]] == [0, 500]


class TestPlayer:
    def test_same_seed_same_frames(self):
        a = ScenarioPlayer(benchmark_workload())
        b = ScenarioPlayer(benchmark_workload())
        for t in (0, 999, 1100, 2500, 4500, 6000, 9999, 20_000):
            assert np.array_equal(a.frame_at(t), b.frame_at(t)), f"frames differ at t={t}"

    def test_different_seed_differs(self):
        a = ScenarioPlayer(benchmark_workload(seed=1))
        b = ScenarioPlayer(benchmark_workload(seed=2))
        assert not np.array_equal(a.frame_at(2500), b.frame_at(2500))

    def test_time_zero_is_home(self):
        player = ScenarioPlayer(benchmark_workload())
        params = {"width": 480, "height": 800}
        assert np.array_equal(player.frame_at(0), home(params, 7, 0))

    def test_freezes_after_end(self):
        player = ScenarioPlayer(small_script())
        last = player.frame_at(1499)
        assert np.array_equal(player.frame_at(5000), last)
        assert np.array_equal(player.frame_at(99_999), last)

    def test_advance_rejects_time_regression(self):
        player = ScenarioPlayer(small_script())
        player.advance(100)
        with pytest.raises(TimeRegressionError):
            player.advance(50)

    def test_browser_frames_differ_at_50ms_spacing(self):
        player = ScenarioPlayer(benchmark_workload())
        times = range(1400, 4200, 50)  # inside the browser step
        frames = [player.frame_at(t) for t in times]
        for first, second in zip(frames, frames[1:]):
            assert not np.array_equal(first, second)


class TestGenerators:
    PARAMS = {"width": 96, "height": 128}

    def test_registry(self):
        gens = builtin_generators()
        assert set(gens) == {"home", "browser_scroll", "music_player", "transition"}

    def test_home_is_static(self):
        assert np.array_equal(home(self.PARAMS, 5, 0), home(self.PARAMS, 5, 7000))

    def test_browser_scroll_shift_oracle(self):
        params = {"width": 96, "height": 128, "velocity": 160}
        t1, t2 = 600, 850
        offset1 = (160 * t1) // 1000
        offset2 = (160 * t2) // 1000
        shift = offset2 - offset1
        f1 = browser_scroll(params, 5, t1)
        f2 = browser_scroll(params, 5, t2)
        content_rows = 128 - BROWSER_CHROME_ROWS
        assert np.array_equal(
            f1[BROWSER_CHROME_ROWS + shift :],
            f2[BROWSER_CHROME_ROWS : BROWSER_CHROME_ROWS + content_rows - shift],
        )

    def test_music_player_diff_confined_to_progress_band(self):
        from remoteframe.devicesim.generators import MUSIC_BAND_ROWS, MUSIC_BAND_TOP

        params = {"width": 480, "height": 800}
        f1 = music_player(params, 5, 1000)
        f2 = music_player(params, 5, 1400)
        diff_rows = np.nonzero((f1 != f2).any(axis=1))[0]
        assert diff_rows.size > 0
        band_y = int(800 * MUSIC_BAND_TOP)
        assert diff_rows.min() >= band_y
        assert diff_rows.max() < band_y + MUSIC_BAND_ROWS

    def test_transition_endpoints(self):
        script = small_script()
        player = ScenarioPlayer(script)
        start = player.frame_at(500)  # transition local t=0
        assert np.array_equal(start, player.frame_at(499))  # equals home's last frame


class TestDeviceState:
    def make_device(self, **kwargs) -> DeviceSimulator:
        return DeviceSimulator(small_script(), clock=kwargs.pop("clock", ManualClock()), **kwargs)

    def test_fixture_counts(self):
        device = self.make_device()
        assert len(device.list_applications()) == 6
        assert len(device.list_processes()) == 8
        nodes = 1  # root
        stack = ["/"]
        while stack:
            for node in device.fs.list(stack.pop()):
                nodes += 1
                if node.kind == "dir":
                    stack.append(node.path)
        assert nodes == 20

    def test_running_filter(self):
        device = self.make_device()
        running = device.list_applications(running_only=True)
        assert {a.package for a in running} == {"com.example.launcher", "com.example.browser"}

    def test_install_then_list_increments(self):
        device = self.make_device()
        before = len(device.list_applications())
        record = device.install_application("com.example.notes", "0.1", b"PK new app")
        assert record.running is False
        assert len(device.list_applications()) == before + 1
        assert device.fs.get("/data/app/com.example.notes.apk") == b"PK new app"

    def test_reinstall_needs_overwrite(self):
        device = self.make_device()
        with pytest.raises(DuplicateIdError):
            device.install_application("com.example.music", "9.9", b"PK")
        updated = device.install_application("com.example.music", "9.9", b"PK", overwrite=True)
        assert updated.version == "9.9"
        assert len(device.list_applications()) == 6

    def test_install_rejects_empty_payload(self):
        device = self.make_device()
        with pytest.raises(InvalidArgumentError):
            device.install_application("com.example.x", "1.0", b"")

    def test_kill_marks_app_not_running(self):
        device = self.make_device()
        device.kill_process(201)
        launcher = next(a for a in device.list_applications() if a.package.endswith("launcher"))
        assert launcher.running is False
        assert 201 not in {p.pid for p in device.list_processes()}

    def test_kill_browser_needs_both_processes(self):
        device = self.make_device()
        device.kill_process(202)
        browser = next(a for a in device.list_applications() if a.package.endswith("browser"))
        assert browser.running is True  # the render process still holds it up
        device.kill_process(203)
        browser = next(a for a in device.list_applications() if a.package.endswith("browser"))
        assert browser.running is False

    def test_kill_pid_zero_reserved(self):
        device = self.make_device()
        with pytest.raises(NotFoundError):
            device.kill_process(0)

    def test_quota_enforced(self):
        device = DeviceSimulator(small_script(), clock=ManualClock(), fs_quota=4096)
        with pytest.raises(Exception) as err:
            device.fs.put("/sdcard/big.bin", b"x" * 8192)
        assert "quota" in str(err.value)


class TestFsTree:
    def test_put_get_round_trip(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        device.fs.put("/a/b/c.txt", b"hello")
        assert device.fs.get("/a/b/c.txt") == b"hello"
        listing = device.fs.list("/a/b")
        assert [n.path for n in listing] == ["/a/b/c.txt"]

    def test_get_missing(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        with pytest.raises(NotFoundError):
            device.fs.get("/missing")

    def test_get_directory_fails(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        with pytest.raises(IsADirectoryError_):
            device.fs.get("/sdcard")

    def test_path_escape_rejected(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        with pytest.raises(PathEscapeError):
            device.fs.get("/../../etc/passwd")

    def test_remove_dir_requires_recursive(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        with pytest.raises(IsADirectoryError_):
            device.fs.remove("/sdcard/music")
        device.fs.remove("/sdcard/music", recursive=True)
        assert not device.fs.exists("/sdcard/music/track01.mp3")


class TestShell:
    def make_device(self):
        return DeviceSimulator(small_script(), clock=ManualClock())

    def test_echo(self):
        assert self.make_device().shell_exec("echo hi") == (0, b"hi\n", b"")

    def test_ls_root(self):
        code, out, err = self.make_device().shell_exec("ls /")
        assert code == 0 and err == b""
        assert set(out.decode().split()) == {"data/", "sdcard/", "system/"}

    def test_unknown_command(self):
        with pytest.raises(UnknownCommandError):
            self.make_device().shell_exec("nosuchcmd")

    def test_failed_command_reports_exit_code(self):
        code, out, err = self.make_device().shell_exec("cat /nope")
        assert code == 1 and b"cat:" in err

    def test_ps_lists_fixture(self):
        code, out, _ = self.make_device().shell_exec("ps")
        assert code == 0
        assert out.decode().count("\n") == 9  # header + 8 rows

    def test_uname(self):
        code, out, _ = self.make_device().shell_exec("uname -a")
        assert code == 0 and b"remoteframe-sim" in out


class TestSensors:
    def test_gps_interpolates(self):
        script = small_script(sensors={"gps": [(0, (0.0, 0.0)), (1000, (10.0, 20.0))]})
        clock = ManualClock()
        device = DeviceSimulator(script, clock=clock)
        clock.set(500)
        _, values = device.sensor_read("gps")
        assert values == (5.0, 10.0)

    def test_proximity_default_far(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        _, values = device.sensor_read("proximity")
        assert values == (5.0,)

    def test_unsupported_sensor(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        with pytest.raises(UnsupportedSensorError):
            device.sensor_read("gyroscope")


class TestFirmware:
    def test_stage_writes_sdcard_file(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        instructions = device.firmware_stage(b"ZIPDATA", "1.2")
        assert device.fs.get("/sdcard/update-1.2.zip") == b"ZIPDATA"
        assert len(instructions) >= 3

    def test_restage_overwrites(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        device.firmware_stage(b"v1", "1.2")
        device.firmware_stage(b"v2", "1.2")
        assert device.fs.get("/sdcard/update-1.2.zip") == b"v2"
        updates = [n for n in device.fs.list("/sdcard") if "update-" in n.path]
        assert len(updates) == 1


class TestInputLog:
    def make_device(self):
        clock = ManualClock(1000.0)
        return DeviceSimulator(small_script(), clock=clock), clock

    def test_pointer_logged(self):
        device, _ = self.make_device()
        device.log_pointer(10, 10, 1)
        entry = device.input_log()[-1]
        assert (entry.kind, entry.x, entry.y, entry.buttons) == ("pointer", 10, 10, 1)

    def test_key_ordering(self):
        device, _ = self.make_device()
        device.log_key(ord("A"), True)
        device.log_key(ord("A"), False)
        down, up = device.input_log()[-2:]
        assert down.down and not up.down
        assert down.seq < up.seq

    def test_pointer_clamped_and_flagged(self):
        device, _ = self.make_device()
        device.log_pointer(10**6, 0, 1)
        entry = device.input_log()[-1]
        assert entry.x == device.width - 1
        assert entry.clamped

    def test_composite_two_tracks_one_group(self):
        device, _ = self.make_device()
        pinch = CompositeInputEvent(
            tracks=(
                (1, (PointerSample(0, 10, 60), PointerSample(100, 40, 60))),
                (2, (PointerSample(0, 90, 60), PointerSample(100, 60, 60))),
            ),
            duration_ms=120,
        )
        group = device.log_composite(pinch)
        entries = [e for e in device.input_log() if e.group_id == group]
        assert len(entries) == 4
        assert {e.track_id for e in entries} == {1, 2}

    def test_single_track_composite_is_pointer_sequence(self):
        device, _ = self.make_device()
        event = CompositeInputEvent(
            tracks=((1, (PointerSample(0, 5, 5), PointerSample(50, 6, 6))),), duration_ms=60
        )
        group = device.log_composite(event)
        entries = [e for e in device.input_log() if e.group_id == group]
        assert [(e.kind, e.x, e.y) for e in entries] == [("pointer", 5, 5), ("pointer", 6, 6)]

    def test_foreign_event_lands_outside_group_span(self):
        device, clock = self.make_device()
        event = CompositeInputEvent(
            tracks=((1, (PointerSample(0, 5, 5), PointerSample(200, 6, 6))),), duration_ms=200
        )
        group = device.log_composite(event)
        group_entries = [e for e in device.input_log() if e.group_id == group]
        span = (min(e.t_ms for e in group_entries), max(e.t_ms for e in group_entries))
        # a pointer logged while the group span is still in the future
        device.log_pointer(1, 1, 0)
        foreign = device.input_log()[-1]
        assert foreign.group_id == 0
        assert foreign.t_ms < span[0] or foreign.t_ms > span[1]

    def test_empty_tracks_rejected(self):
        device, _ = self.make_device()
        with pytest.raises(InvalidArgumentError):
            device.log_composite(CompositeInputEvent(tracks=(), duration_ms=10))

    def test_invariants_hold(self):
        device, clock = self.make_device()
        device.log_pointer(1, 2, 1)
        clock.advance(50)
        device.log_key(13, True)
        device.kill_process(203)
        device.check_invariants()


class TestStatus:
    def test_uptime_monotone(self):
        clock = ManualClock()
        device = DeviceSimulator(small_script(), clock=clock)
        first = device.status().uptime_s
        clock.advance(3000)
        assert device.status().uptime_s >= first

    def test_fixture_battery(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        assert device.status().battery == 80

    def test_alert_listener_fanout(self):
        device = DeviceSimulator(small_script(), clock=ManualClock())
        seen: list[str] = []
        device.add_alert_listener(seen.append)
        device.raise_alert("battery low")
        assert seen == ["battery low"]
        assert device.status().alerts == ("battery low",)


class TestTapSkip:
    def test_tap_advances_to_next_step(self):
        script = small_script(
            tap_skip=True,
            steps=(ScenarioStep("home", 500, {"icons": 4}), ScenarioStep("browser_scroll", 800)),
        )
        clock = ManualClock()
        device = DeviceSimulator(script, clock=clock)
        clock.set(100)  # inside the 500 ms home step
        before = device.framebuffer()
        device.log_pointer(10, 10, 1)
        after = device.framebuffer()
        assert not np.array_equal(before.pixels, after.pixels)
