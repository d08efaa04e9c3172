# 场估计配置的Pydantic模型

from typing import List, Optional, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


Point = Tuple[float, float]


class StrictModel(BaseModel):
    """拒绝未知键，拼错的配置键直接报配置错误"""
    model_config = ConfigDict(extra='forbid')


class AreaOfInterest(StrictModel):
    """矩形感兴趣区域（米）"""
    x_min: float = 0.0
    x_max: float = 100.0
    y_min: float = 0.0
    y_max: float = 100.0

    @model_validator(mode='after')
    def validate_bounds(self):
        """验证边界顺序"""
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min 必须小于 x_max: {self.x_min} >= {self.x_max}")
        if not self.y_min < self.y_max:
            raise ValueError(f"y_min 必须小于 y_max: {self.y_min} >= {self.y_max}")
        return self

    @property
    def center(self) -> Point:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, point) -> bool:
        """判断点是否在区域内（含边界）"""
        x, y = float(point[0]), float(point[1])
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


class CostParams(StrictModel):
    """逻辑代价参数"""
    eta: float = Field(5.0, gt=0)
    tau: float = Field(1.0, gt=0)


def _validate_range(v: Tuple[float, float], name: str) -> Tuple[float, float]:
    if v[0] > v[1]:
        raise ValueError(f"{name} 下界大于上界: {v}")
    return v


class TruthSamplingConfig(StrictModel):
    """真值场随机生成参数"""
    p_true: int = Field(4, ge=1)
    beta_range: Tuple[float, float] = (0.7, 1.4)
    center_range: Tuple[float, float] = (5.0, 95.0)
    sigma_range: Tuple[float, float] = (25.0, 45.0)
    noise_variance: float = Field(0.1, gt=0)

    @field_validator('beta_range', 'center_range', 'sigma_range')
    @classmethod
    def validate_ranges(cls, v, info):
        """验证区间"""
        v = _validate_range(v, info.field_name)
        if info.field_name == 'sigma_range' and v[0] <= 0:
            raise ValueError(f"sigma_range 必须为正: {v}")
        return v


class BasisConfig(StrictModel):
    """估计器使用的径向基网格"""
    per_axis: int = Field(4, ge=1)
    length_scale: float = Field(25.0, gt=0)


class ExactOnmConfig(StrictModel):
    """精确在线牛顿法的阻尼/正则化设置"""
    damping_multiplier: float = Field(0.1, gt=0, le=1)
    regularization: float = Field(0.1, ge=0)
    switch_threshold: float = Field(1.0, ge=0)
    singular_threshold: float = Field(1e-6, ge=0)
    regularize_damped: bool = True

    @model_validator(mode='after')
    def validate_thresholds(self):
        """切换阈值不能低于奇异阈值"""
        if self.switch_threshold < self.singular_threshold:
            raise ValueError(
                f"switch_threshold ({self.switch_threshold}) 必须不小于 singular_threshold ({self.singular_threshold})"
            )
        return self


class BatchOptimumConfig(StrictModel):
    """批量最优解（遗憾诊断用）的牛顿法设置"""
    tolerance: float = Field(1e-8, gt=0)
    max_iterations: int = Field(100, ge=1)
    armijo: float = Field(1e-4, gt=0, lt=1)
    max_halvings: int = Field(40, ge=0)
    hessian_floor: float = Field(1e-8, ge=0)


class ApproxOnmConfig(StrictModel):
    """近似在线牛顿法设置，P_0 = epsilon * I"""
    epsilon: float = Field(0.1, gt=0)


class SensingConfig(StrictModel):
    """主动感知设置"""
    mode: Literal['active', 'fixed', 'random'] = 'active'
    candidates: Optional[List[Point]] = None
    candidate_grid: Optional[int] = Field(None, ge=1)
    step: float = Field(5.0, gt=0)
    alpha: float = Field(0.4, ge=0, le=1)
    area: AreaOfInterest = Field(default_factory=AreaOfInterest)

    @field_validator('candidates')
    @classmethod
    def validate_candidates(cls, v):
        """候选点列表不能为空"""
        if v is not None and len(v) == 0:
            raise ValueError("candidates 不能为空列表")
        return v


class EvalGridConfig(StrictModel):
    """评估网格分辨率"""
    resolution: int = Field(32, ge=1)


class DiagnosticsConfig(StrictModel):
    """遗憾与持续激励诊断"""
    track_regret: bool = False
    window: int = Field(64, ge=1)


class ScenarioConfig(StrictModel):
    """单次场景配置"""
    seed: int = Field(0, ge=0)
    steps: int = Field(1000, ge=0)
    estimator: Literal['exact', 'approx'] = 'approx'
    initial_position: Optional[Point] = None
    area: AreaOfInterest = Field(default_factory=AreaOfInterest)
    cost: CostParams = Field(default_factory=CostParams)
    truth: TruthSamplingConfig = Field(default_factory=TruthSamplingConfig)
    basis: BasisConfig = Field(default_factory=BasisConfig)
    initial_beta_range: Tuple[float, float] = (0.0, 1.0)
    exact: ExactOnmConfig = Field(default_factory=ExactOnmConfig)
    approx: ApproxOnmConfig = Field(default_factory=ApproxOnmConfig)
    batch_oracle: BatchOptimumConfig = Field(default_factory=BatchOptimumConfig)
    sensing: SensingConfig = Field(default_factory=SensingConfig)
    eval_grid: EvalGridConfig = Field(default_factory=EvalGridConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)

    @field_validator('initial_beta_range')
    @classmethod
    def validate_initial_beta_range(cls, v):
        """验证初始估计区间"""
        return _validate_range(v, 'initial_beta_range')

    @model_validator(mode='after')
    def validate_initial_position(self):
        """初始位置必须在区域内"""
        if self.initial_position is not None and not self.area.contains(self.initial_position):
            raise ValueError(f"initial_position {self.initial_position} 不在感兴趣区域内")
        return self

    @property
    def start_position(self) -> Point:
        """初始位置，未配置时取区域中心"""
        if self.initial_position is not None:
            return (float(self.initial_position[0]), float(self.initial_position[1]))
        return self.area.center

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return self.model_copy(update={'seed': seed})

    def with_estimator(self, estimator: str) -> "ScenarioConfig":
        return self.model_copy(update={'estimator': estimator})


class BenchConfig(StrictModel):
    """批量基准设置"""
    scenarios: int = Field(100, ge=1)
    estimators: List[Literal['exact', 'approx']] = Field(default_factory=lambda: ['approx', 'exact'])
    workers: int = Field(1, ge=1)
    min_completion: float = Field(0.9, ge=0, le=1)

    @field_validator('estimators')
    @classmethod
    def validate_estimators(cls, v):
        """估计器列表不能为空"""
        if not v:
            raise ValueError("estimators 不能为空")
        return v


class OutputConfig(StrictModel):
    """输出设置"""
    dir: str = "results"
    per_step_mse: bool = False
    traces: bool = True


class CliConfig(StrictModel):
    """命令行有效配置：场景 + 批量 + 输出"""
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
