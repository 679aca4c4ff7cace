"""
Serializers for experiment configuration documents.

Each TOML section has a serializer that validates types and ranges and
rejects keys it does not declare, so a misspelled hyperparameter fails loudly
instead of silently falling back to its default.
"""

from django.conf import settings
from rest_framework import serializers

from .agent import VARIANTS
from .environment import BACKINGS


class StrictSerializer(serializers.Serializer):
    """Serializer that treats undeclared keys as validation errors."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown key."] for key in unknown})
            data = dict(data)
            for name, field in self.fields.items():
                # Missing sections still validate so their defaults are filled in.
                if isinstance(field, serializers.BaseSerializer) and name not in data:
                    data[name] = {}
        return super().to_internal_value(data)


class CatalogSerializer(StrictSerializer):
    J = serializers.IntegerField(default=20, min_value=1, help_text="Number of exercises (actions)")
    topic_count = serializers.IntegerField(default=14, min_value=1)
    area_count = serializers.IntegerField(default=7, min_value=1)
    file = serializers.CharField(
        required=False,
        allow_null=True,
        default=None,
        help_text="Catalog CSV (exercise_id,topic_id,area_id); overrides the synthetic layout"
    )

    def validate(self, attrs):
        if attrs['file'] is None:
            if attrs['topic_count'] > attrs['J']:
                raise serializers.ValidationError({'topic_count': ["Must not exceed J."]})
            if attrs['area_count'] > attrs['topic_count']:
                raise serializers.ValidationError({'area_count': ["Must not exceed topic_count."]})
        return attrs


class StudentSerializer(StrictSerializer):
    eta_correct = serializers.FloatField(default=0.25, min_value=0.0, max_value=0.999)
    eta_wrong = serializers.FloatField(default=0.05, min_value=0.0, max_value=0.999)
    kappa = serializers.FloatField(default=0.15, min_value=0.0, max_value=0.999,
                                   help_text="Fraction of the gain transferred to same-topic exercises")
    slip = serializers.FloatField(default=0.05, min_value=0.0, max_value=0.999)
    guess = serializers.FloatField(default=0.1, min_value=0.0, max_value=0.999)

    def validate(self, attrs):
        if attrs['eta_wrong'] > attrs['eta_correct']:
            raise serializers.ValidationError({'eta_wrong': ["Must not exceed eta_correct."]})
        return attrs


class ProfileSerializer(StrictSerializer):
    mu_g = serializers.FloatField(default=-0.8, help_text="Mean student ability (logit scale)")
    sigma_g = serializers.FloatField(default=0.5, min_value=0.0)
    sigma_z = serializers.FloatField(default=0.7, min_value=0.0,
                                     help_text="Spread of per-exercise offsets")
    fixed_mastery = serializers.FloatField(required=False, allow_null=True, default=None,
                                           min_value=1e-6, max_value=1 - 1e-6)


class EnvironmentSerializer(StrictSerializer):
    backing = serializers.ChoiceField(choices=list(BACKINGS), default='analytic')
    seed_history = serializers.IntegerField(default=10, min_value=0,
                                            help_text="Random attempts that fix s_1 under the akt backing")
    akt_checkpoint = serializers.CharField(required=False, allow_null=True, default=None)
    student = StudentSerializer(required=False)
    profile = ProfileSerializer(required=False)

    def validate(self, attrs):
        if attrs['backing'] == 'akt' and not attrs['akt_checkpoint']:
            raise serializers.ValidationError({'akt_checkpoint': ["Required for the akt backing."]})
        return attrs


class GoalSerializer(StrictSerializer):
    beta = serializers.FloatField(default=0.8, help_text="Target APR, strictly between 0 and 1")
    t_max = serializers.IntegerField(default=100, min_value=1)

    def validate_beta(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("Must lie strictly between 0 and 1.")
        return value


class RewardSerializer(StrictSerializer):
    d_floor = serializers.FloatField(default=1e-3, min_value=1e-12,
                                     help_text="Lower bound on the goal distance in the reward divisor")


class AgentSerializer(StrictSerializer):
    variant = serializers.ChoiceField(choices=list(VARIANTS), default='eppo')
    gamma = serializers.FloatField(default=0.99, min_value=0.0, max_value=1.0)
    clip_eps = serializers.FloatField(default=0.2, min_value=1e-9)
    alpha = serializers.FloatField(default=0.01, min_value=0.0, help_text="Entropy temperature")
    vf_coef = serializers.FloatField(default=0.5, min_value=0.0)
    lr = serializers.FloatField(default=3e-4, min_value=1e-12)
    update_epochs = serializers.IntegerField(default=4, min_value=1)
    minibatch_size = serializers.IntegerField(default=256, min_value=1)
    episodes_per_update = serializers.IntegerField(default=8, min_value=1)
    buffer_capacity = serializers.IntegerField(default=64, min_value=1)
    hidden = serializers.IntegerField(default=64, min_value=1)
    normalize_advantages = serializers.BooleanField(default=True)

    def validate(self, attrs):
        if attrs['buffer_capacity'] < attrs['episodes_per_update']:
            raise serializers.ValidationError({'buffer_capacity': ["Must be >= episodes_per_update."]})
        return attrs


class AktSerializer(StrictSerializer):
    d = serializers.IntegerField(default=32, min_value=1, help_text="Embedding width")
    window = serializers.IntegerField(default=128, min_value=1)
    lr = serializers.FloatField(default=1e-2, min_value=1e-12)
    epochs = serializers.IntegerField(default=200, min_value=0)
    batch = serializers.IntegerField(default=32, min_value=1)
    holdout = serializers.FloatField(default=0.2, min_value=0.0, max_value=0.9,
                                     help_text="Fraction of students held out for accuracy")


class RunSerializer(StrictSerializer):
    episodes = serializers.IntegerField(default=3000, min_value=0)
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0), default=lambda: [0], min_length=1)
    output_dir = serializers.CharField(default=lambda: str(settings.ALPN_DEFAULTS['OUTPUT_DIR']))
    workers = serializers.IntegerField(default=1, min_value=1)
    checkpoint_every = serializers.IntegerField(default=lambda: settings.ALPN_DEFAULTS['CHECKPOINT_EVERY'], min_value=0,
                                                help_text="Updates between checkpoints (0 disables)")
    eval_students = serializers.IntegerField(default=50, min_value=1)
    curve_window = serializers.IntegerField(default=50, min_value=1)
    bin_width = serializers.FloatField(default=0.1, min_value=1e-6, max_value=1.0)


class ExperimentConfigSerializer(StrictSerializer):
    """Top-level experiment document."""
    catalog = CatalogSerializer(required=False)
    environment = EnvironmentSerializer(required=False)
    goal = GoalSerializer(required=False)
    reward = RewardSerializer(required=False)
    agent = AgentSerializer(required=False)
    akt = AktSerializer(required=False)
    run = RunSerializer(required=False)
