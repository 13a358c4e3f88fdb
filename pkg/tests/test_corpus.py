import numpy as np
import pytest

from lungmtl.corpus import (
    AudioClip,
    CycleAnnotation,
    DiseaseLabel,
    Gender,
    SoundLabel,
    SYNTH_DISEASE_MAP,
    load_corpus,
    parse_demographics,
    parse_diagnosis_file,
    parse_filename,
    parse_icbhi_annotations,
    read_wav,
    recording_sound_label,
    sound_label_from_flags,
    split_by_patient,
    stratified_split,
    synth_corpus,
    synth_demographics,
    write_synth_corpus,
)
from lungmtl.errors import (
    BadTokenCountError,
    ClassTooSmallWarning,
    EmptyFileError,
    MalformedRowError,
    MissingDiagnosisWarning,
)
from lungmtl.wavio import write_wav


class TestLabels:
    def test_flag_mapping(self):
        assert sound_label_from_flags(True, False) == SoundLabel.CRACKLES
        assert sound_label_from_flags(False, True) == SoundLabel.WHEEZES
        assert sound_label_from_flags(True, True) == SoundLabel.BOTH
        assert sound_label_from_flags(False, False) == SoundLabel.HEALTHY

    def test_label_codes_are_stable(self):
        assert [int(s) for s in SoundLabel] == [0, 1, 2, 3]
        assert [int(d) for d in DiseaseLabel] == [0, 1, 2, 3, 4, 5]
        assert DiseaseLabel.COPD == 2
        assert DiseaseLabel.HEALTHY == 5

    def test_recording_priority(self):
        c = lambda cr, wh: CycleAnnotation(0.0, 1.0, cr, wh)
        assert recording_sound_label([c(1, 0), c(0, 1)]) == SoundLabel.CRACKLES
        assert recording_sound_label([c(0, 1), c(0, 0)]) == SoundLabel.WHEEZES
        assert recording_sound_label([c(1, 1), c(1, 0)]) == SoundLabel.BOTH
        assert recording_sound_label([c(0, 0)]) == SoundLabel.HEALTHY
        assert recording_sound_label([]) == SoundLabel.HEALTHY


class TestFilename:
    def test_tokens(self):
        pid, rec, loc, mode, equip = parse_filename("101_1b1_Al_sc_Meditron.wav")
        assert (pid, rec, loc, mode, equip) == (101, "1b1", "Al", "sc", "Meditron")

    def test_wrong_token_count(self):
        with pytest.raises(BadTokenCountError):
            parse_filename("101_1b1_Al_sc.wav")
        with pytest.raises(BadTokenCountError):
            parse_filename("101_1b1_Al_sc_Meditron_extra.wav")

    def test_non_integer_patient(self):
        with pytest.raises(BadTokenCountError):
            parse_filename("xx_1b1_Al_sc_Meditron.wav")


class TestAnnotations:
    def test_parse(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0.0\t2.5\t1\t0\n2.5\t5.0\t0\t1\n")
        cycles = parse_icbhi_annotations(p)
        assert len(cycles) == 2
        assert cycles[0].crackle and not cycles[0].wheeze
        assert cycles[1].wheeze and not cycles[1].crackle
        assert cycles[1].start_s == 2.5

    def test_malformed_rows(self, tmp_path):
        p = tmp_path / "a.txt"
        for body in ("0.0 2.5 1\n", "0.0 2.5 1 2\n", "2.5 0.0 1 0\n", "a b 1 0\n"):
            p.write_text(body)
            with pytest.raises(MalformedRowError):
                parse_icbhi_annotations(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("\n\n")
        with pytest.raises(EmptyFileError):
            parse_icbhi_annotations(p)


class TestDiagnosis:
    def test_parse_case_insensitive(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("patient_id,diagnosis\n101,COPD\n102,copd\n103,Pneumonia\n"
                     "104,URTI\n105,Asthma\n")
        m = parse_diagnosis_file(p)
        assert m[101] == DiseaseLabel.COPD
        assert m[102] == DiseaseLabel.COPD
        assert m[103] == DiseaseLabel.PNEUMONIA
        assert m[104] == DiseaseLabel.URTI
        assert 105 not in m  # unknown name dropped

    def test_empty(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("patient_id,diagnosis\n")
        with pytest.raises(EmptyFileError):
            parse_diagnosis_file(p)


class TestDemographics:
    def test_adult_and_child_bmi(self, tmp_path):
        p = tmp_path / "demo.csv"
        p.write_text(
            "patient_id,sex,age,adult_bmi,child_weight_kg,child_height_cm\n"
            "101,F,70,28.47,,\n"
            "102,M,3,,15.0,100.0\n"
            "103,M,50,,,\n"
            "104,F,200,25.0,,\n")
        records, skipped = parse_demographics(p)
        by_id = {r.patient_id: r for r in records}
        assert by_id[101].bmi_kg_m2 == pytest.approx(28.47)
        assert by_id[101].gender == Gender.FEMALE
        assert by_id[102].bmi_kg_m2 == pytest.approx(15.0)  # 15 / 1.0^2
        assert skipped == [103, 104]


def _write_recording(audio_dir, name, rate, cycles_text, samples=None):
    if samples is None:
        samples = np.zeros(rate // 2)
    write_wav(audio_dir / f"{name}.wav", samples, rate)
    (audio_dir / f"{name}.txt").write_text(cycles_text)


class TestLoadCorpus:
    @pytest.fixture()
    def corpus_dir(self, tmp_path):
        audio = tmp_path / "audio"
        audio.mkdir()
        _write_recording(audio, "101_1b1_Al_sc_M", 4000, "0.0 0.25 1 0\n0.25 0.5 0 1\n")
        _write_recording(audio, "102_1b1_Al_sc_M", 4000, "0.0 0.5 0 0\n")
        _write_recording(audio, "103_1b1_Al_sc_M", 4000, "0.0 0.5 1 1\n")
        (tmp_path / "diag.csv").write_text(
            "patient_id,diagnosis\n101,COPD\n102,Healthy\n103,Unknowntag\n")
        return tmp_path

    def test_recording_level(self, corpus_dir):
        with pytest.warns(MissingDiagnosisWarning):
            corpus = load_corpus(corpus_dir / "audio", corpus_dir / "diag.csv")
        assert corpus.n_recordings_found == 3
        assert corpus.skipped_missing_diagnosis == ["103_1b1_Al_sc_M"]
        by_pid = {r.patient_id: r for r in corpus.records}
        assert by_pid[101].sound == SoundLabel.CRACKLES  # crackle beats wheeze
        assert by_pid[101].disease == DiseaseLabel.COPD
        assert by_pid[102].sound == SoundLabel.HEALTHY

    def test_cycle_level(self, corpus_dir):
        with pytest.warns(MissingDiagnosisWarning):
            corpus = load_corpus(corpus_dir / "audio", corpus_dir / "diag.csv",
                                 level="cycle")
        recs = [r for r in corpus.records if r.patient_id == 101]
        assert [r.sound for r in recs] == [SoundLabel.CRACKLES, SoundLabel.WHEEZES]
        assert all(len(r.clip.samples) == 1000 for r in recs)  # 0.25 s at 4 kHz

    def test_workers_match_serial(self, corpus_dir):
        with pytest.warns(MissingDiagnosisWarning):
            serial = load_corpus(corpus_dir / "audio", corpus_dir / "diag.csv")
        with pytest.warns(MissingDiagnosisWarning):
            parallel = load_corpus(corpus_dir / "audio", corpus_dir / "diag.csv",
                                   workers=4)
        assert [r.clip.recording_id for r in serial.records] == \
               [r.clip.recording_id for r in parallel.records]

    def test_bad_level(self, corpus_dir):
        with pytest.raises(ValueError):
            load_corpus(corpus_dir / "audio", corpus_dir / "diag.csv", level="patient")


class TestStratifiedSplit:
    def test_sizes_and_partition(self):
        labels = np.array([0] * 50 + [1] * 30 + [2] * 20)
        split = stratified_split(100, labels, 0.8, seed=7)
        assert len(split.train) == 80 and len(split.test) == 20
        assert sorted(split.train + split.test) == list(range(100))

    def test_class_proportions_within_one(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 4, size=137)
        split = stratified_split(137, labels, 0.8, seed=11)
        for cls in range(4):
            total = int(np.sum(labels == cls))
            in_train = int(np.sum(labels[split.train] == cls))
            assert abs(in_train - 0.8 * total) < 1.0 + 1e-9

    def test_deterministic(self):
        labels = np.array([0, 1] * 25)
        a = stratified_split(50, labels, 0.8, seed=5)
        b = stratified_split(50, labels, 0.8, seed=5)
        c = stratified_split(50, labels, 0.8, seed=6)
        assert a.train == b.train and a.test == b.test
        assert a.train != c.train

    def test_tiny_class_falls_back(self):
        labels = np.array([0] * 9 + [1])
        with pytest.warns(ClassTooSmallWarning):
            split = stratified_split(10, labels, 0.8, seed=0)
        assert len(split.train) == 8
        assert sorted(split.train + split.test) == list(range(10))

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            stratified_split(10, np.zeros(10), 1.0, seed=0)


class TestPatientSplit:
    def test_no_patient_straddles(self):
        rng = np.random.default_rng(0)
        pids = rng.integers(0, 20, size=200)
        split = split_by_patient(pids, 0.8, seed=4)
        assert sorted(split.train + split.test) == list(range(200))
        assert set(pids[split.train]) & set(pids[split.test]) == set()

    def test_deterministic(self):
        pids = np.repeat(np.arange(10), 5)
        a = split_by_patient(pids, 0.8, seed=1)
        b = split_by_patient(pids, 0.8, seed=1)
        assert a.train == b.train


class TestSynthCorpus:
    def test_counts_and_determinism(self):
        a = synth_corpus(2, seed=9, duration_s=0.5)
        b = synth_corpus(2, seed=9, duration_s=0.5)
        assert len(a) == 8
        for (ca, sa, da), (cb, sb, db) in zip(a, b):
            assert sa == sb and da == db
            np.testing.assert_array_equal(ca.samples, cb.samples)

    def test_disease_map_consistency(self):
        clips = synth_corpus(4, seed=2, duration_s=0.5)
        for i, (clip, sound, disease) in enumerate(clips):
            variant = (i % 4) % 2
            assert disease == SYNTH_DISEASE_MAP[(sound, variant)]
        sounds = [s for _, s, _ in clips]
        assert sounds.count(SoundLabel.CRACKLES) == 4
        assert sounds.count(SoundLabel.HEALTHY) == 4

    def test_wheeze_has_tonal_peak(self):
        # v0 wheeze tone lies in 200-450 Hz; the healthy base does not.
        clips = synth_corpus(1, seed=5, sample_rate_hz=4000, duration_s=2.0)
        by_sound = {s: c for c, s, _ in clips}
        freqs = np.fft.rfftfreq(8000, d=1.0 / 4000)
        band = (freqs >= 200) & (freqs <= 450)

        def band_ratio(x):
            mag = np.abs(np.fft.rfft(x)) ** 2
            return mag[band].sum() / mag.sum()

        assert band_ratio(by_sound[SoundLabel.WHEEZES].samples) > \
            3 * band_ratio(by_sound[SoundLabel.HEALTHY].samples)

    def test_samples_in_range(self):
        for clip, _, _ in synth_corpus(2, seed=1, duration_s=0.5):
            assert np.max(np.abs(clip.samples)) <= 1.0

    def test_write_round_trip(self, tmp_path):
        out = write_synth_corpus(tmp_path / "synth", 1, seed=3,
                                 duration_s=0.5, demographics_n=5)
        corpus = load_corpus(out / "audio", out / "diagnosis.csv",
                             demographics_file=out / "demographics.csv")
        assert len(corpus.records) == 4
        assert corpus.skipped_missing_diagnosis == []
        generated = synth_corpus(1, seed=3, duration_s=0.5)
        sounds = {r.patient_id: r.sound for r in corpus.records}
        for clip, sound, _ in generated:
            assert sounds[clip.patient_id] == sound
        assert len(corpus.demographics) == 5

    def test_read_wav_provenance(self, tmp_path):
        write_wav(tmp_path / "7_1b1_Al_sc_M.wav", np.zeros(100), 4000)
        clip = read_wav(tmp_path / "7_1b1_Al_sc_M.wav")
        assert clip.patient_id == 7
        assert clip.recording_id == "7_1b1_Al_sc_M"
        write_wav(tmp_path / "noconv.wav", np.zeros(100), 4000)
        assert read_wav(tmp_path / "noconv.wav").patient_id is None


class TestSynthDemographics:
    def test_ranges_and_determinism(self):
        a = synth_demographics(500, seed=42)
        b = synth_demographics(500, seed=42)
        assert len(a) == 500
        for ra, rb in zip(a, b):
            assert ra == rb
        ages = np.array([r.age_years for r in a])
        bmis = np.array([r.bmi_kg_m2 for r in a])
        assert ages.min() >= 35.0 and ages.max() <= 90.0
        assert bmis.min() >= 15.0 and bmis.max() <= 40.0
        genders = {r.gender for r in a}
        assert genders == {Gender.FEMALE, Gender.MALE}
