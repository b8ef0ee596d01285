# -*- coding: utf-8 -*-

from setuptools import setup, find_packages
import os

# Read README for long description
def read_file(filename):
    with open(os.path.join(os.path.dirname(__file__), filename), encoding='utf-8') as f:
        return f.read()

setup(
    name='fracreg',
    version='1.0.0',
    description='Numerical laboratory for boundary regularity of the degenerate fractional p-Laplacian',
    long_description=read_file('README.md') if os.path.exists('README.md') else '',
    long_description_content_type='text/markdown',
    license='MIT',

    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    python_requires=">=3.9",

    # Console script entry point for 'fracreg' command
    entry_points={
        'console_scripts': [
            'fracreg=source.cli:main',
        ],
    },

    # Numerical core
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.12',
        'mpmath>=1.3.0',
    ],

    # Optional dependencies
    extras_require={
        'cli': [
            'colorama>=0.4.6',
            'PyYAML>=6.0.1',
        ],
        'plot': [
            'matplotlib>=3.6',
        ],
        'all': [
            'colorama>=0.4.6',
            'PyYAML>=6.0.1',
            'matplotlib>=3.6',
        ],
        'dev': [
            'pytest>=7.4.0',
            'pytest-cov>=4.1.0',
            'black>=23.0.0',
            'isort>=5.12.0',
            'flake8>=6.0.0',
            'mypy>=1.5.0',
        ],
    },

    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],

    keywords='fractional p-laplacian nonlocal boundary regularity obstacle barrier numerics',

    zip_safe=False
)
