from .synthesis import METHODS, SynthesisSpec, stratified_rows, synthesize_sequence
from .transforms import blur_images, gaussian_kernel, rotate_images

__all__ = [
    'METHODS', 'SynthesisSpec', 'stratified_rows', 'synthesize_sequence',
    'blur_images', 'gaussian_kernel', 'rotate_images',
]
